"""Service configuration: endpoints, manifolds, defaults, listen address."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..attack import AttackConfig
from ..backends.errors import ConfigurationError
from ..backends.wire import DEFAULT_STEPS, ROLES
from ..pipeline import DEFAULT_SPHERE_K, AnonymizationChoice, PipelineConfig

DEFAULT_LISTEN = "127.0.0.1:8080"
DEFAULT_WORKERS = 2
DEFAULT_MAX_UPLOAD = 32 * 1024 * 1024

# Roles every request needs, and the extra roles each option pulls in.
BASE_ROLES = ("segment", "pose", "edges")
OPTION_ROLES = {
    AnonymizationChoice.PHYSICAL_REMOVAL: ("inpaint", "generate"),
    AnonymizationChoice.ADVERSARIAL_REMOVAL: ("detect",),
    AnonymizationChoice.MASK_BASED_REMOVAL: ("embed", "generate"),
    AnonymizationChoice.IDENTITY_REMOVAL: ("embed", "faceswap", "enhance"),
    AnonymizationChoice.NO_ACTION: (),
}


@dataclass
class ServiceConfig:
    endpoints: dict[str, str] = field(default_factory=dict)
    body_manifold: str | None = None
    face_manifold: str | None = None
    options: tuple[AnonymizationChoice, ...] = tuple(AnonymizationChoice)
    attack: AttackConfig = field(default_factory=AttackConfig)
    dilation_scale: float = 0.02
    dilation_min: int = 3
    steps: int = DEFAULT_STEPS
    sphere_k: int = DEFAULT_SPHERE_K
    listen: str = DEFAULT_LISTEN
    store_dir: str = "./bodyanon-store"
    workers: int = DEFAULT_WORKERS
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD

    def required_roles(self) -> tuple[str, ...]:
        required = list(BASE_ROLES)
        for option in self.options:
            for role in OPTION_ROLES[option]:
                if role not in required:
                    required.append(role)
        return tuple(required)

    def validate_endpoints(self) -> None:
        """Every role reachable from an enabled option needs an endpoint."""
        unknown = sorted(set(self.endpoints) - set(ROLES))
        if unknown:
            raise ConfigurationError(
                f"unknown roles in endpoint map: {', '.join(unknown)}",
                role=unknown[0])
        missing = [role for role in self.required_roles()
                   if role not in self.endpoints]
        if missing:
            raise ConfigurationError(
                f"options {[o.value for o in self.options]} require "
                f"endpoints for: {', '.join(missing)}", role=missing[0])

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(attack=self.attack,
                              dilation_scale=self.dilation_scale,
                              dilation_min=self.dilation_min,
                              steps=self.steps, sphere_k=self.sphere_k)

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def _parse_attack(data: dict) -> AttackConfig:
    return AttackConfig(
        epsilon=float(data.get("epsilon", AttackConfig.epsilon)),
        alpha=float(data.get("alpha", AttackConfig.alpha)),
        max_iters=int(data.get("max_iters", AttackConfig.max_iters)),
        stop_threshold=float(data.get("stop_threshold",
                                      AttackConfig.stop_threshold)))


def config_from_dict(data: dict) -> ServiceConfig:
    defaults = ServiceConfig()
    manifolds = data.get("manifolds", {})
    options = tuple(AnonymizationChoice.parse(o)
                    for o in data.get("options",
                                      [c.value for c in AnonymizationChoice]))
    if not options:
        raise ConfigurationError("options list must not be empty")
    dilation = data.get("dilation", {})
    config = ServiceConfig(
        endpoints=dict(data.get("endpoints", {})),
        body_manifold=manifolds.get("body"),
        face_manifold=manifolds.get("face"),
        options=options,
        attack=_parse_attack(data.get("attack", {})),
        dilation_scale=float(dilation.get("scale", defaults.dilation_scale)),
        dilation_min=int(dilation.get("minimum", defaults.dilation_min)),
        steps=int(data.get("steps", defaults.steps)),
        sphere_k=int(data.get("sphere_k", defaults.sphere_k)),
        listen=str(data.get("listen", defaults.listen)),
        store_dir=str(data.get("store_dir", defaults.store_dir)),
        workers=int(data.get("workers", defaults.workers)),
        max_upload_bytes=int(data.get("max_upload_bytes",
                                      defaults.max_upload_bytes)),
    )
    if config.workers < 1:
        raise ConfigurationError("workers must be >= 1")
    return config


def load_config(path) -> ServiceConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: "
                                 f"{exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return config_from_dict(data)
