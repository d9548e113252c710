"""Pixel-level primitives: masks, crops, compositing, dilation, PNG codecs.

Images are uint8 arrays of shape (H, W, 3), row-major, origin top-left with
x = column and y = row.  Masks are boolean (H, W) arrays.  Everything here is
a pure function over immutable inputs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage


class EmptyMaskError(ValueError):
    pass


def validate_image(image) -> np.ndarray:
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected uint8 HxWx3 image, got {img.dtype} {img.shape}")
    return img


def validate_mask(mask, shape: tuple[int, int] | None = None) -> np.ndarray:
    m = np.asarray(mask)
    if m.dtype != bool or m.ndim != 2:
        raise ValueError(f"expected boolean HxW mask, got {m.dtype} {m.shape}")
    if shape is not None and m.shape != shape:
        raise ValueError(f"mask shape {m.shape} does not match {shape}")
    return m


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box; (x, y) is the top-left corner, w/h the extent."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box extent must be positive, got {self.w}x{self.h}")

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    @property
    def area(self) -> int:
        return self.w * self.h

    def inside(self, height: int, width: int) -> bool:
        return (self.x >= 0 and self.y >= 0
                and self.x + self.w <= width and self.y + self.h <= height)

    def iou(self, other: "BoundingBox") -> float:
        ix = max(self.x, other.x)
        iy = max(self.y, other.y)
        ix2 = min(self.x + self.w, other.x + other.w)
        iy2 = min(self.y + self.h, other.y + other.h)
        if ix2 <= ix or iy2 <= iy:
            return 0.0
        inter = (ix2 - ix) * (iy2 - iy)
        return inter / float(self.area + other.area - inter)

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


def dilate(mask, radius: int, iterations: int = 1) -> np.ndarray:
    """Morphological dilation with a (2*radius+1) square element, repeated.

    Degenerate masks (empty, full) pass through; the result never grows past
    the mask bounds.
    """
    m = validate_mask(mask)
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return ndimage.binary_dilation(m, structure=structure, iterations=iterations)


def default_dilation_radius(box: BoundingBox, scale: float = 0.02,
                            minimum: int = 3) -> int:
    """Dilation margin that grows with body size: max(minimum, scale * extent)."""
    return max(minimum, round(scale * max(box.w, box.h)))


def composite(base, patch, mask, feather: int = 0) -> np.ndarray:
    """patch where the mask is set, base elsewhere.

    feather > 0 blends linearly over that many pixels inside the mask border
    instead of switching hard (off by default so outputs stay byte-exact).
    """
    b = validate_image(base)
    p = validate_image(patch)
    m = validate_mask(mask)
    if b.shape != p.shape or m.shape != b.shape[:2]:
        raise ValueError(
            f"dimension mismatch: base {b.shape}, patch {p.shape}, mask {m.shape}"
        )
    if feather <= 0:
        return np.where(m[..., None], p, b)
    depth = ndimage.distance_transform_edt(m)
    alpha = np.clip(depth / float(feather), 0.0, 1.0)[..., None]
    out = b.astype(np.float64) * (1.0 - alpha) + p.astype(np.float64) * alpha
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def crop(image, box: BoundingBox) -> np.ndarray:
    img = validate_image(image)
    h, w = img.shape[:2]
    if not box.inside(h, w):
        raise ValueError(f"box {box} outside {w}x{h} image")
    ys, xs = box.slices
    return img[ys, xs].copy()


def paste(image, patch, box: BoundingBox) -> np.ndarray:
    """Copy of `image` with `patch` written into `box` (patch must match the box)."""
    img = validate_image(image)
    p = validate_image(patch)
    h, w = img.shape[:2]
    if not box.inside(h, w):
        raise ValueError(f"box {box} outside {w}x{h} image")
    if p.shape[:2] != (box.h, box.w):
        raise ValueError(f"patch shape {p.shape[:2]} does not match box {box}")
    out = img.copy()
    ys, xs = box.slices
    out[ys, xs] = p
    return out


def mask_to_bbox(mask) -> BoundingBox:
    """Tightest box containing every set pixel; empty masks raise EmptyMaskError."""
    m = validate_mask(mask)
    rows = np.any(m, axis=1)
    if not rows.any():
        raise EmptyMaskError("mask has no set pixels")
    cols = np.any(m, axis=0)
    y0, y1 = np.flatnonzero(rows)[[0, -1]]
    x0, x1 = np.flatnonzero(cols)[[0, -1]]
    return BoundingBox(x=int(x0), y=int(y0), w=int(x1 - x0 + 1), h=int(y1 - y0 + 1))


def union_masks(masks) -> np.ndarray:
    """Pixelwise OR over a non-empty list of same-shape masks."""
    if not masks:
        raise ValueError("mask list must be non-empty")
    first = validate_mask(masks[0])
    out = first.copy()
    for m in masks[1:]:
        out |= validate_mask(m, shape=first.shape)
    return out


def box_mask(shape: tuple[int, int], box: BoundingBox) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    ys, xs = box.slices
    m[ys, xs] = True
    return m


def zero_masked(image, mask) -> np.ndarray:
    """Copy of `image` with masked pixels set to 0 (the conditioning convention)."""
    img = validate_image(image)
    m = validate_mask(mask, shape=img.shape[:2])
    out = img.copy()
    out[m] = 0
    return out


# -- PNG codecs (the interchange format for images and masks) ---------------

def encode_png(image) -> bytes:
    img = validate_image(image)
    buf = io.BytesIO()
    PILImage.fromarray(img, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"not a decodable image: {exc}") from exc


def encode_mask_png(mask) -> bytes:
    m = validate_mask(mask)
    buf = io.BytesIO()
    PILImage.fromarray(np.where(m, 255, 0).astype(np.uint8), mode="L").save(
        buf, format="PNG")
    return buf.getvalue()


def decode_mask_png(data: bytes) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"not a decodable image: {exc}") from exc
    return arr >= 128


# -- Keypoint rendering ------------------------------------------------------

# 18 joints laid out as a 6x3 grid; one fixed color per joint index.
KEYPOINT_GRID_COLS = (0.25, 0.5, 0.75)
KEYPOINT_GRID_ROWS = (0.10, 0.26, 0.42, 0.58, 0.74, 0.90)

_JOINT_COLORS = np.array([
    (255, 0, 0), (255, 85, 0), (255, 170, 0), (255, 255, 0), (170, 255, 0),
    (85, 255, 0), (0, 255, 0), (0, 255, 85), (0, 255, 170), (0, 255, 255),
    (0, 170, 255), (0, 85, 255), (0, 0, 255), (85, 0, 255), (170, 0, 255),
    (255, 0, 255), (255, 0, 170), (255, 0, 85),
], dtype=np.uint8)

# Bones connect grid neighbors: along rows and down columns.
_BONES = tuple(
    [(r * 3 + c, r * 3 + c + 1) for r in range(6) for c in range(2)]
    + [(r * 3 + c, (r + 1) * 3 + c) for r in range(5) for c in range(3)]
)

_BONE_COLOR = np.array((128, 128, 128), dtype=np.uint8)


def _draw_line(canvas: np.ndarray, x0: int, y0: int, x1: int, y1: int,
               color: np.ndarray) -> None:
    # Integer Bresenham; deterministic across platforms.
    h, w = canvas.shape[:2]
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        if 0 <= x0 < w and 0 <= y0 < h:
            canvas[y0, x0] = color
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def render_pose_map(shape: tuple[int, int], keypoint_sets) -> np.ndarray:
    """Draw skeletons (bones then 3x3 joint dots, fixed colors) on black.

    `keypoint_sets` is an iterable of (18, 3) arrays of (x, y, confidence);
    joints with confidence <= 0 are skipped.
    """
    canvas = np.zeros((shape[0], shape[1], 3), dtype=np.uint8)
    for kps in keypoint_sets:
        pts = np.asarray(kps, dtype=np.float64)
        if pts.shape != (18, 3):
            raise ValueError(f"expected (18, 3) keypoints, got {pts.shape}")
        for a, b in _BONES:
            if pts[a, 2] > 0 and pts[b, 2] > 0:
                _draw_line(canvas, int(round(pts[a, 0])), int(round(pts[a, 1])),
                           int(round(pts[b, 0])), int(round(pts[b, 1])),
                           _BONE_COLOR)
        for idx in range(18):
            if pts[idx, 2] <= 0:
                continue
            cx, cy = int(round(pts[idx, 0])), int(round(pts[idx, 1]))
            y0, y1 = max(0, cy - 1), min(shape[0], cy + 2)
            x0, x1 = max(0, cx - 1), min(shape[1], cx + 2)
            canvas[y0:y1, x0:x1] = _JOINT_COLORS[idx]
    return canvas


def grid_keypoints(box: BoundingBox) -> np.ndarray:
    """18 keypoints on the fixed 6x3 grid inside `box`, confidence 1."""
    pts = np.zeros((18, 3), dtype=np.float64)
    idx = 0
    for ry in KEYPOINT_GRID_ROWS:
        for rx in KEYPOINT_GRID_COLS:
            pts[idx] = (box.x + rx * (box.w - 1), box.y + ry * (box.h - 1), 1.0)
            idx += 1
    return pts
