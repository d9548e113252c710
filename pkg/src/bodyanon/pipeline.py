"""Per-body anonymization options and the order-invariant multi-body flow.

The five options are applied per body, but the output never depends on the
order in which callers list their choices: bodies are processed in a
canonical order (bbox x, then y, then content-hash id), generation results
are merged in one pass over the union of dilated masks, face swaps composite
after the merge, and the adversarial perturbation is applied last so nothing
overwrites it.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .attack import AdversarialResult, AttackConfig, vanish_attack
from .backends.client import HubDetector
from .backends.wire import (DEFAULT_STEPS, EdgesRequest, EmbedRequest,
                            EnhanceRequest, FaceswapRequest, GenerationRequest,
                            InpaintRequest, PoseRequest, SegmentRequest)
from .manifold import DEFAULT_DIM, BodyManifold, UnknownActivityError, \
    farthest_entries, select_face_guide, select_guide
from .raster import (BoundingBox, composite, crop, default_dilation_radius,
                     dilate, grid_keypoints, render_pose_map, union_masks,
                     validate_image, zero_masked)

logger = logging.getLogger(__name__)

DEFAULT_SPHERE_K = 10
MIN_FACE_HEIGHT = 12


class PipelineError(Exception):
    pass


class UnknownBodyError(PipelineError):
    def __init__(self, body_id: str):
        super().__init__(f"choice references unknown body_id {body_id!r}")
        self.body_id = body_id


class DuplicateChoiceError(PipelineError):
    def __init__(self, body_id: str):
        super().__init__(f"body_id {body_id!r} appears more than once in "
                         f"the choices list")
        self.body_id = body_id


class InvalidOptionError(PipelineError):
    def __init__(self, value: str):
        legal = ", ".join(c.value for c in AnonymizationChoice)
        super().__init__(f"invalid option {value!r}; legal options are: {legal}")
        self.value = value


class AnonymizationChoice(enum.Enum):
    PHYSICAL_REMOVAL = "physical_removal"
    ADVERSARIAL_REMOVAL = "adversarial_removal"
    MASK_BASED_REMOVAL = "mask_based_removal"
    IDENTITY_REMOVAL = "identity_removal"
    NO_ACTION = "no_action"

    @classmethod
    def parse(cls, value: str) -> "AnonymizationChoice":
        for choice in cls:
            if choice.value == value:
                return choice
        raise InvalidOptionError(value)


@dataclass(frozen=True)
class BodyInstance:
    """One segmented person: mask, box, pose, per-body edge map."""

    body_id: str
    mask: np.ndarray
    bbox: BoundingBox
    pose: np.ndarray
    edge_map: np.ndarray
    confidence: float


@dataclass(frozen=True)
class PipelineConfig:
    attack: AttackConfig = field(default_factory=AttackConfig)
    dilation_scale: float = 0.02
    dilation_min: int = 3
    steps: int = DEFAULT_STEPS
    sphere_k: int = DEFAULT_SPHERE_K
    face_min_height: int = MIN_FACE_HEIGHT


@dataclass
class AnonymizationRequest:
    image: np.ndarray
    choices: list[tuple[str, AnonymizationChoice]]
    seed: int = 0
    config: PipelineConfig = field(default_factory=PipelineConfig)


def body_content_id(mask: np.ndarray) -> str:
    """Stable content hash of a body mask; independent of discovery order."""
    h, w = mask.shape
    blob = h.to_bytes(4, "big") + w.to_bytes(4, "big") + mask.tobytes()
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def _canonical_key(body: BodyInstance) -> tuple:
    return (body.bbox.x, body.bbox.y, body.body_id)


def detect_bodies(image, hub) -> list[BodyInstance]:
    """Segment, pose and edge backends fused into canonical BodyInstances."""
    img = validate_image(image)
    segment = hub.call("segment", SegmentRequest(image=img))
    pose = hub.call("pose", PoseRequest(image=img))
    edges = hub.call("edges", EdgesRequest(image=img))

    bodies = []
    for index, sb in enumerate(segment.bodies):
        keypoints = None
        if index < len(pose.keypoint_sets):
            candidate = pose.keypoint_sets[index]
            cx, cy = candidate[:, 0].mean(), candidate[:, 1].mean()
            if (sb.bbox.x <= cx < sb.bbox.x + sb.bbox.w
                    and sb.bbox.y <= cy < sb.bbox.y + sb.bbox.h):
                keypoints = candidate
        if keypoints is None:
            keypoints = grid_keypoints(sb.bbox)
        body_edges = np.where(sb.mask[..., None], edges.edge_map, 0)
        bodies.append(BodyInstance(
            body_id=body_content_id(sb.mask),
            mask=sb.mask,
            bbox=sb.bbox,
            pose=keypoints,
            edge_map=body_edges.astype(np.uint8),
            confidence=sb.confidence,
        ))
    bodies.sort(key=_canonical_key)
    return bodies


def _dilated(body: BodyInstance, config: PipelineConfig) -> np.ndarray:
    radius = default_dilation_radius(body.bbox, scale=config.dilation_scale,
                                     minimum=config.dilation_min)
    return dilate(body.mask, radius)


def run_physical(image, body: BodyInstance, hub, seed: int = 0,
                 config: PipelineConfig | None = None) -> np.ndarray:
    """Erase the body and fill the hole from the inpainting backend."""
    img = validate_image(image)
    cfg = config or PipelineConfig()
    dmask = _dilated(body, cfg)
    response = hub.call("inpaint", InpaintRequest(
        image=zero_masked(img, dmask), mask=dmask, seed=seed))
    return composite(img, response.image, dmask)


def run_adversarial(image, bodies, hub,
                    cfg: AttackConfig | None = None) -> AdversarialResult:
    """Suppress detections overlapping the chosen bodies' boxes."""
    if not bodies:
        raise ValueError("adversarial removal requires at least one body")
    detector = HubDetector(hub)
    return vanish_attack(validate_image(image), detector,
                         config=cfg or AttackConfig(),
                         target_boxes=[b.bbox for b in bodies])


def _guide_for(manifold: BodyManifold, embedding: np.ndarray, activity: str,
               warnings: list[str] | None):
    try:
        return select_guide(manifold, embedding, activity)
    except UnknownActivityError:
        fallback = farthest_entries(manifold, embedding, 1)[0]
        message = (f"activity {activity!r} not in manifold; "
                   f"fell back to global farthest entry {fallback.id!r}")
        logger.warning(message)
        if warnings is not None:
            warnings.append(message)
        return fallback


def build_generation_request(image, body: BodyInstance, m: BodyManifold, hub,
                             seed: int = 0,
                             config: PipelineConfig | None = None,
                             warnings: list[str] | None = None,
                             ) -> GenerationRequest:
    """Assemble the conditioning bundle for one mask-based removal."""
    img = validate_image(image)
    cfg = config or PipelineConfig()
    embed = hub.call("embed", EmbedRequest(image=crop(img, body.bbox)))
    guide = _guide_for(m, embed.embedding, embed.activity, warnings)
    dmask = _dilated(body, cfg)
    pose_map = render_pose_map(img.shape[:2], [body.pose])
    return GenerationRequest(
        masked_image=zero_masked(img, dmask),
        mask=dmask,
        pose_map=pose_map,
        edge_map=body.edge_map,
        guide_embedding=guide.embedding,
        steps=cfg.steps,
        seed=seed,
    )


def run_mask_based(image, body: BodyInstance, m: BodyManifold, hub,
                   seed: int = 0, config: PipelineConfig | None = None,
                   warnings: list[str] | None = None) -> np.ndarray:
    """Replace the body with a generated stranger guided by the manifold."""
    img = validate_image(image)
    request = build_generation_request(img, body, m, hub, seed=seed,
                                       config=config, warnings=warnings)
    response = hub.call("generate", request)
    return composite(img, response.image, request.mask)


def face_box(body: BodyInstance) -> BoundingBox:
    """Face region approximated as the upper third of the body box."""
    return BoundingBox(x=body.bbox.x, y=body.bbox.y, w=body.bbox.w,
                       h=max(1, body.bbox.h // 3))


def run_identity(image, body: BodyInstance, faces: BodyManifold, hub,
                 sphere_k: int = DEFAULT_SPHERE_K, seed: int = 0,
                 config: PipelineConfig | None = None,
                 warnings: list[str] | None = None,
                 source_image=None) -> np.ndarray:
    """Swap the face for the most dissimilar manifold face, then enhance.

    The face embedding is taken from `source_image` (the untouched photo)
    when given, so earlier edits to other bodies never change which guide
    face is selected.
    """
    img = validate_image(image)
    cfg = config or PipelineConfig()
    if body.bbox.h < cfg.face_min_height:
        message = (f"body {body.body_id!r} too small for identity removal "
                   f"(bbox height {body.bbox.h} < {cfg.face_min_height}); "
                   f"skipped")
        logger.warning(message)
        if warnings is not None:
            warnings.append(message)
        return img
    source = validate_image(source_image) if source_image is not None else img
    box = face_box(body)
    embed = hub.call("embed", EmbedRequest(image=crop(source, box)))
    guide = select_face_guide(faces, embed.embedding, sphere_k=sphere_k,
                              seed=seed)
    swapped = hub.call("faceswap", FaceswapRequest(
        image=img, box=box, guide_embedding=guide.embedding))
    enhanced = hub.call("enhance", EnhanceRequest(image=swapped.image, box=box))
    return enhanced.image


def _merge_guide(guides: list[np.ndarray], dim: int) -> np.ndarray:
    if not guides:
        basis = np.zeros(dim, dtype=np.float64)
        basis[0] = 1.0
        return basis
    mean = np.mean(np.stack(guides), axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return guides[0]
    return mean / norm


def anonymize(request: AnonymizationRequest, hub,
              manifold: BodyManifold | None = None,
              face_manifold: BodyManifold | None = None,
              warnings: list[str] | None = None) -> np.ndarray:
    """Apply every chosen option and return the final image.

    Processing order is canonical regardless of the choices list order:
    generation options run per body against the original image, one merge
    pass regenerates the union of their dilated masks on top of the
    assembled results, identity swaps composite after the merge, and the
    adversarial perturbation goes last.
    """
    img = validate_image(request.image)
    cfg = request.config
    bodies = detect_bodies(img, hub)
    by_id = {b.body_id: b for b in bodies}

    seen: set[str] = set()
    choice_map: dict[str, AnonymizationChoice] = {}
    for body_id, choice in request.choices:
        if body_id not in by_id:
            raise UnknownBodyError(body_id)
        if body_id in seen:
            raise DuplicateChoiceError(body_id)
        seen.add(body_id)
        if not isinstance(choice, AnonymizationChoice):
            choice = AnonymizationChoice.parse(str(choice))
        choice_map[body_id] = choice

    def chosen(option: AnonymizationChoice) -> list[BodyInstance]:
        return [b for b in bodies if choice_map.get(b.body_id) == option]

    if chosen(AnonymizationChoice.MASK_BASED_REMOVAL) and manifold is None:
        raise PipelineError("mask_based_removal requires a body manifold")
    if chosen(AnonymizationChoice.IDENTITY_REMOVAL) and face_manifold is None:
        raise PipelineError("identity_removal requires a face manifold")

    generation_bodies = [
        (b, choice_map[b.body_id]) for b in bodies
        if choice_map.get(b.body_id) in (AnonymizationChoice.PHYSICAL_REMOVAL,
                                         AnonymizationChoice.MASK_BASED_REMOVAL)
    ]

    current = img.copy()

    if generation_bodies:
        base = img.copy()
        dmasks = []
        guides: list[np.ndarray] = []
        poses = []
        edge_maps = []
        for body, choice in generation_bodies:
            dmask = _dilated(body, cfg)
            if choice is AnonymizationChoice.PHYSICAL_REMOVAL:
                result = run_physical(img, body, hub, seed=request.seed,
                                      config=cfg)
            else:
                gen_request = build_generation_request(
                    img, body, manifold, hub, seed=request.seed, config=cfg,
                    warnings=warnings)
                result = composite(img, hub.call("generate", gen_request).image,
                                   gen_request.mask)
                guides.append(gen_request.guide_embedding)
                poses.append(body.pose)
                edge_maps.append(body.edge_map)
            base[dmask] = result[dmask]
            dmasks.append(dmask)
        union = union_masks(dmasks)
        dim = manifold.dim if manifold is not None else DEFAULT_DIM
        merge_request = GenerationRequest(
            masked_image=base,
            mask=union,
            pose_map=render_pose_map(img.shape[:2], poses),
            edge_map=(np.maximum.reduce(edge_maps) if edge_maps
                      else np.zeros_like(img)),
            guide_embedding=_merge_guide(guides, dim),
            steps=cfg.steps,
            seed=request.seed,
        )
        merged = hub.call("generate", merge_request)
        current = composite(img, merged.image, union)

    for body in chosen(AnonymizationChoice.IDENTITY_REMOVAL):
        current = run_identity(current, body, face_manifold, hub,
                               sphere_k=cfg.sphere_k, seed=request.seed,
                               config=cfg, warnings=warnings,
                               source_image=img)

    adversarial_bodies = chosen(AnonymizationChoice.ADVERSARIAL_REMOVAL)
    if adversarial_bodies:
        outcome = run_adversarial(current, adversarial_bodies, hub,
                                  cfg=cfg.attack)
        if not outcome.converged:
            message = (f"adversarial removal did not converge within "
                       f"{cfg.attack.max_iters} iterations "
                       f"(max objectness {outcome.final_max_objectness:.3f})")
            logger.warning(message)
            if warnings is not None:
                warnings.append(message)
        current = outcome.image

    return current
