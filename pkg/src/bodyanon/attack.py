"""Iterative vanishing attack that suppresses detector confidence in-place.

The attack performs signed gradient descent on pixel values inside an L-inf
budget around the source image.  It only needs two things from a detector:
scored boxes and a per-pixel gradient of total objectness, so any backend
satisfying DetectorInterface works, remote or local.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .raster import BoundingBox, validate_image, validate_mask

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 8.0 / 255.0
DEFAULT_ALPHA = 1.0 / 255.0
DEFAULT_MAX_ITERS = 200
DEFAULT_STOP_THRESHOLD = 0.25

# A detection belongs to a targeted body when their boxes overlap this much.
TARGET_IOU = 0.5


@dataclass(frozen=True)
class Detection:
    """One scored box; objectness is a probability in [0, 1]."""

    box: BoundingBox
    objectness: float


class DetectorInterface(Protocol):
    def score(self, image: np.ndarray) -> list[Detection]:
        """Scored person boxes for a uint8 HxWx3 image."""
        ...

    def grad(self, image: np.ndarray) -> np.ndarray:
        """d(total objectness)/d(normalized pixel) as a float HxW array."""
        ...


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = DEFAULT_EPSILON
    alpha: float = DEFAULT_ALPHA
    max_iters: int = DEFAULT_MAX_ITERS
    stop_threshold: float = DEFAULT_STOP_THRESHOLD

    def __post_init__(self):
        if not 0.0 < self.alpha <= self.epsilon:
            raise ValueError(
                f"alpha must be in (0, epsilon], got alpha={self.alpha} "
                f"epsilon={self.epsilon}")
        if self.epsilon > 1.0:
            raise ValueError(f"epsilon must be <= 1, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.stop_threshold < 1.0:
            raise ValueError(
                f"stop_threshold must be in (0, 1), got {self.stop_threshold}")

    @property
    def pixel_budget(self) -> int:
        """L-inf budget in uint8 levels."""
        return int(round(255.0 * self.epsilon))


@dataclass(frozen=True)
class AdversarialResult:
    image: np.ndarray
    iterations_used: int
    final_max_objectness: float
    linf_used: float
    converged: bool
    initial_detections: list[Detection] = field(default_factory=list)
    final_detections: list[Detection] = field(default_factory=list)


def _targeted(detections: Sequence[Detection],
              target_boxes: Sequence[BoundingBox] | None,
              target_region: np.ndarray | None) -> list[Detection]:
    """Detections the attack is responsible for silencing."""
    if target_boxes is not None:
        return [d for d in detections
                if any(d.box.iou(t) > TARGET_IOU for t in target_boxes)]
    if target_region is not None:
        return [d for d in detections
                if bool(target_region[d.box.slices].any())]
    return list(detections)


def _max_objectness(detections: Sequence[Detection]) -> float:
    return max((d.objectness for d in detections), default=0.0)


def vanish_attack(image, detector: DetectorInterface,
                  config: AttackConfig | None = None,
                  target_region=None,
                  target_boxes: Sequence[BoundingBox] | None = None,
                  ) -> AdversarialResult:
    """Push every targeted detection below the stop threshold.

    Each iteration takes one signed-gradient step of size alpha, clipped to
    the epsilon ball around the source and to valid pixel range.  When
    `target_region` is given the perturbation never leaves that mask and only
    detections overlapping it count toward the stop test; `target_boxes`
    restricts the stop test to detections overlapping a listed box (IoU above
    0.5) without limiting the perturbation.  Already-clean images return
    unchanged with zero iterations.
    """
    src = validate_image(image)
    cfg = config or AttackConfig()
    region = None
    if target_region is not None:
        region = validate_mask(target_region, shape=src.shape[:2])

    initial = detector.score(src)
    targeted = _targeted(initial, target_boxes, region)
    if _max_objectness(targeted) < cfg.stop_threshold:
        return AdversarialResult(image=src.copy(), iterations_used=0,
                                 final_max_objectness=_max_objectness(targeted),
                                 linf_used=0.0, converged=True,
                                 initial_detections=list(initial),
                                 final_detections=list(initial))

    base = src.astype(np.float64) / 255.0
    base_int = src.astype(np.int16)
    budget = cfg.pixel_budget
    lo = np.clip(base - cfg.epsilon, 0.0, 1.0)
    hi = np.clip(base + cfg.epsilon, 0.0, 1.0)

    x = base.copy()
    current = src
    detections = initial
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iters + 1):
        grad = np.asarray(detector.grad(current), dtype=np.float64)
        if grad.shape != src.shape[:2]:
            raise ValueError(
                f"gradient shape {grad.shape} does not match image {src.shape[:2]}")
        step = cfg.alpha * np.sign(grad)[..., None]
        if region is not None:
            step = np.where(region[..., None], step, 0.0)
        x = np.clip(x - step, lo, hi)
        # Integer clamp keeps the uint8 budget exact against float rounding.
        quantized = np.rint(x * 255.0).astype(np.int16)
        quantized = np.clip(quantized, base_int - budget, base_int + budget)
        current = np.clip(quantized, 0, 255).astype(np.uint8)
        detections = detector.score(current)
        targeted = _targeted(detections, target_boxes, region)
        if _max_objectness(targeted) < cfg.stop_threshold:
            converged = True
            break

    linf = int(np.max(np.abs(current.astype(np.int16) - base_int))) / 255.0
    if not converged:
        logger.warning("attack hit max_iters=%d without convergence",
                       cfg.max_iters)
    return AdversarialResult(image=current, iterations_used=iterations,
                             final_max_objectness=_max_objectness(targeted),
                             linf_used=linf, converged=converged,
                             initial_detections=list(initial),
                             final_detections=list(detections))
