"""Deterministic in-process backends for every role.

Each mock is a pure function of (request, construction seed): repeated calls
are byte-identical, so pipeline tests can assert exact outputs.  The rules
are simple but structurally faithful:

  segment   8-connected components of pixels with saturation > 0.5
  pose      18 keypoints on a fixed grid inside each component bbox
  edges     Sobel magnitude over gray, thresholded
  embed     unit vector seeded by a keyed hash of the pixel bytes
  inpaint   masked region filled with seeded low-saturation texture
  generate  same fill rule, digest covers the full conditioning bundle
  faceswap  per-channel LUT permutation applied inside the target box
  enhance   a different keyed LUT permutation inside the box
  detect    differentiable logistic over a jittered averaging kernel,
            with a gradient side-channel for the attack
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading

import numpy as np
from scipy import ndimage

from ..attack import Detection
from ..raster import BoundingBox, grid_keypoints, mask_to_bbox, validate_image
from .errors import ConfigurationError, ProtocolError
from .wire import (GRAD_ROLE, REQUEST_TYPES, ROLES, DetectGradResponse,
                   DetectResponse, EdgesResponse, EmbedResponse, ImageResponse,
                   PoseResponse, SegmentBody, SegmentResponse)

logger = logging.getLogger(__name__)

DEFAULT_EMBED_DIM = 512

SATURATION_THRESHOLD = 0.5
EDGE_THRESHOLD = 128.0

# Logistic detector: objectness per 8x8 tile is sigmoid(KAPPA * (w - THETA))
# where w is the jitter-weighted mean gray of the tile in [0, 1].
TILE = 8
KAPPA = 160.0
THETA = 0.7303
KERNEL_JITTER = 0.02

# Texture fills stay this close to gray so they never look saturated.
TEXTURE_CHROMA = 20


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def saturation_components(image: np.ndarray) -> list[np.ndarray]:
    """Masks of 8-connected regions whose (max-min)/255 exceeds 0.5."""
    img = validate_image(image).astype(np.int16)
    sat = (img.max(axis=2) - img.min(axis=2)) / 255.0
    labeled, count = ndimage.label(sat > SATURATION_THRESHOLD,
                                   structure=np.ones((3, 3), dtype=bool))
    return [labeled == idx for idx in range(1, count + 1)]


class MockHub:
    """All nine roles plus the detect gradient, behind one call() method."""

    def __init__(self, seed: int = 0, embed_dim: int = DEFAULT_EMBED_DIM):
        if embed_dim < 1:
            raise ValueError(f"embed_dim must be >= 1, got {embed_dim}")
        self.seed = int(seed)
        self.embed_dim = int(embed_dim)
        self.calls: list[str] = []
        self._log_lock = threading.Lock()
        self._handlers = {
            "segment": self._segment,
            "pose": self._pose,
            "edges": self._edges,
            "embed": self._embed,
            "inpaint": self._inpaint,
            "generate": self._generate,
            "faceswap": self._faceswap,
            "enhance": self._enhance,
            "detect": self._detect,
            GRAD_ROLE: self._detect_grad,
        }

    def call(self, role: str, request):
        if role not in self._handlers:
            raise ConfigurationError(f"unknown backend role {role!r}", role=role)
        expected = REQUEST_TYPES[role]
        if not isinstance(request, expected):
            raise ProtocolError(
                f"role {role!r} expects {expected.__name__}, "
                f"got {type(request).__name__}", field="request", role=role)
        with self._log_lock:
            self.calls.append(role)
        return self._handlers[role](request)

    # -- keyed determinism helpers -------------------------------------

    def _key(self, label: str) -> bytes:
        seed_bytes = (self.seed & (2 ** 64 - 1)).to_bytes(8, "big")
        return hashlib.blake2b(label.encode("utf-8"), key=seed_bytes,
                               digest_size=16).digest()

    def _rng(self, label: str, data: bytes) -> np.random.Generator:
        digest = hashlib.blake2b(data, key=self._key(label),
                                 digest_size=16).digest()
        return np.random.Generator(np.random.PCG64(
            int.from_bytes(digest, "big")))

    def _request_rng(self, label: str, request) -> np.random.Generator:
        blob = json.dumps(request.to_payload(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        return self._rng(label, blob)

    def _texture(self, rng: np.random.Generator, height: int,
                 width: int) -> np.ndarray:
        gray = rng.integers(0, 256, size=(height, width), dtype=np.int16)
        chroma = rng.integers(-TEXTURE_CHROMA, TEXTURE_CHROMA + 1,
                              size=(height, width, 3), dtype=np.int16)
        return np.clip(gray[..., None] + chroma, 0, 255).astype(np.uint8)

    def _lut_remap(self, label: str, request, image: np.ndarray,
                   box: BoundingBox) -> np.ndarray:
        img = validate_image(image)
        h, w = img.shape[:2]
        if not box.inside(h, w):
            raise ProtocolError(f"box {box.as_list()} outside {w}x{h} image",
                                field="box", role=label)
        rng = self._request_rng(label, request)
        lut = np.stack([rng.permutation(256).astype(np.uint8)
                        for _ in range(3)])
        out = img.copy()
        region = out[box.slices]
        for channel in range(3):
            region[..., channel] = lut[channel][region[..., channel]]
        return out

    # -- role handlers ---------------------------------------------------

    def _segment(self, request) -> SegmentResponse:
        bodies = []
        for mask in saturation_components(request.image):
            bbox = mask_to_bbox(mask)
            confidence = float(mask.sum()) / float(bbox.area)
            bodies.append(SegmentBody(mask=mask, bbox=bbox,
                                      confidence=confidence))
        return SegmentResponse(bodies=bodies)

    def _pose(self, request) -> PoseResponse:
        sets = [grid_keypoints(mask_to_bbox(mask))
                for mask in saturation_components(request.image)]
        return PoseResponse(keypoint_sets=sets)

    def _edges(self, request) -> EdgesResponse:
        gray = validate_image(request.image).mean(axis=2)
        gx = ndimage.sobel(gray, axis=1)
        gy = ndimage.sobel(gray, axis=0)
        edge = np.hypot(gx, gy) > EDGE_THRESHOLD
        edge_map = np.repeat(np.where(edge, 255, 0).astype(np.uint8)[..., None],
                             3, axis=2)
        return EdgesResponse(edge_map=edge_map)

    def _embed(self, request) -> EmbedResponse:
        img = validate_image(request.image)
        h, w = img.shape[:2]
        blob = h.to_bytes(4, "big") + w.to_bytes(4, "big") + img.tobytes()
        digest = hashlib.blake2b(blob, key=self._key("embed"),
                                 digest_size=16).digest()
        code = int.from_bytes(digest, "big")
        rng = np.random.Generator(np.random.PCG64(code))
        vec = rng.standard_normal(self.embed_dim)
        vec /= np.linalg.norm(vec)
        return EmbedResponse(embedding=vec,
                             activity=f"mock-activity-{code % 4}")

    def _inpaint(self, request) -> ImageResponse:
        img = validate_image(request.image)
        rng = self._request_rng("inpaint", request)
        texture = self._texture(rng, *img.shape[:2])
        out = img.copy()
        out[request.mask] = texture[request.mask]
        return ImageResponse(image=out)

    def _generate(self, request) -> ImageResponse:
        img = validate_image(request.masked_image)
        rng = self._request_rng("generate", request)
        texture = self._texture(rng, *img.shape[:2])
        out = img.copy()
        out[request.mask] = texture[request.mask]
        return ImageResponse(image=out)

    def _faceswap(self, request) -> ImageResponse:
        return ImageResponse(image=self._lut_remap("faceswap", request,
                                                   request.image, request.box))

    def _enhance(self, request) -> ImageResponse:
        return ImageResponse(image=self._lut_remap("enhance", request,
                                                   request.image, request.box))

    # -- logistic detector -----------------------------------------------

    def _kernel(self, height: int, width: int) -> np.ndarray:
        th, tw = height // TILE, width // TILE
        rng = self._rng("detect-kernel", f"{height}x{width}".encode("ascii"))
        jitter = rng.uniform(-1.0, 1.0, size=(th, tw, TILE, TILE))
        return KAPPA * (1.0 + KERNEL_JITTER * jitter) / float(TILE * TILE)

    def _tile_scores(self, image: np.ndarray):
        img = validate_image(image)
        h, w = img.shape[:2]
        th, tw = h // TILE, w // TILE
        if th == 0 or tw == 0:
            return None, None
        kernel = self._kernel(h, w)
        gray = img.mean(axis=2) / 255.0
        tiles = gray[:th * TILE, :tw * TILE].reshape(
            th, TILE, tw, TILE).transpose(0, 2, 1, 3)
        z = (kernel * tiles).sum(axis=(2, 3)) - KAPPA * THETA
        return _sigmoid(z), kernel

    def _box_objectness(self, scores: np.ndarray | None,
                        box: BoundingBox) -> float:
        if scores is None:
            return 0.0
        th, tw = scores.shape
        # Tiles whose centers the box covers; fall back to the box center.
        r0 = max(0, -(-(box.y - TILE // 2) // TILE))
        r1 = min(th - 1, (box.y + box.h - 1 - TILE // 2) // TILE)
        c0 = max(0, -(-(box.x - TILE // 2) // TILE))
        c1 = min(tw - 1, (box.x + box.w - 1 - TILE // 2) // TILE)
        if r1 < r0 or c1 < c0:
            r = min(th - 1, max(0, (box.y + box.h // 2) // TILE))
            c = min(tw - 1, max(0, (box.x + box.w // 2) // TILE))
            return float(scores[r, c])
        return float(scores[r0:r1 + 1, c0:c1 + 1].max())

    def _detect(self, request) -> DetectResponse:
        scores, _ = self._tile_scores(request.image)
        detections = []
        for mask in saturation_components(request.image):
            box = mask_to_bbox(mask)
            detections.append(Detection(
                box=box, objectness=self._box_objectness(scores, box)))
        return DetectResponse(detections=detections)

    def _detect_grad(self, request) -> DetectGradResponse:
        img = validate_image(request.image)
        h, w = img.shape[:2]
        grad = np.zeros((h, w), dtype=np.float32)
        scores, kernel = self._tile_scores(img)
        if scores is not None:
            th, tw = scores.shape
            sprime = scores * (1.0 - scores)
            field = (sprime[..., None, None] * kernel).transpose(
                0, 2, 1, 3).reshape(th * TILE, tw * TILE)
            grad[:th * TILE, :tw * TILE] = field.astype(np.float32)
        return DetectGradResponse(grad=grad)


class MockBackend:
    """Single-role view over a MockHub, satisfying the one-role contract."""

    def __init__(self, role: str, seed: int = 0,
                 embed_dim: int = DEFAULT_EMBED_DIM):
        if role not in ROLES and role != GRAD_ROLE:
            raise ConfigurationError(f"unknown backend role {role!r}", role=role)
        self.role = role
        self._hub = MockHub(seed=seed, embed_dim=embed_dim)

    def __call__(self, request):
        return self._hub.call(self.role, request)


def mock_backend(role: str, seed: int = 0,
                 embed_dim: int = DEFAULT_EMBED_DIM) -> MockBackend:
    """Deterministic in-process backend for one role."""
    return MockBackend(role, seed=seed, embed_dim=embed_dim)
