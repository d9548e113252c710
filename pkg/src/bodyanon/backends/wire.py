"""Wire schemas for every backend role.

One HTTP POST path per role (/v1/{role}; the detect role additionally serves
/v1/detect/grad).  Bodies are JSON; image payloads travel as base64 PNG under
the keys "image", "mask", "pose_map" and "edge_map"; the detect gradient
travels as base64 row-major float32.  Each request/response pair below has a
to_payload/from_payload codec, and serialize/deserialize roundtrips are the
identity on every schema.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from ..attack import Detection
from ..raster import (BoundingBox, decode_mask_png, decode_png, encode_mask_png,
                      encode_png, validate_image, validate_mask)
from .errors import ProtocolError

ROLES = ("segment", "pose", "edges", "embed", "inpaint", "generate",
         "faceswap", "enhance", "detect")

# Pseudo-role for the gradient side-channel of the detect backend.
GRAD_ROLE = "detect_grad"

DEFAULT_STEPS = 60
DEFAULT_TIMEOUT = 30.0


def role_path(role: str) -> str:
    if role == GRAD_ROLE:
        return "/v1/detect/grad"
    return f"/v1/{role}"


# -- low-level codecs --------------------------------------------------------

def image_to_b64(image: np.ndarray) -> str:
    return base64.b64encode(encode_png(image)).decode("ascii")


def mask_to_b64(mask: np.ndarray) -> str:
    return base64.b64encode(encode_mask_png(mask)).decode("ascii")


def grad_to_b64(grad: np.ndarray) -> str:
    arr = np.ascontiguousarray(grad, dtype=np.float32)
    return base64.b64encode(arr.tobytes()).decode("ascii")


def _b64_bytes(value: Any, name: str, role: str) -> bytes:
    if not isinstance(value, str):
        raise ProtocolError(f"field {name!r} must be a base64 string",
                            field=name, role=role)
    try:
        return base64.b64decode(value.encode("ascii"), validate=True)
    except Exception as exc:
        raise ProtocolError(f"field {name!r} is not valid base64: {exc}",
                            field=name, role=role) from exc


def image_from_b64(value: Any, name: str, role: str) -> np.ndarray:
    data = _b64_bytes(value, name, role)
    try:
        return decode_png(data)
    except Exception as exc:
        raise ProtocolError(f"field {name!r} is not a decodable PNG: {exc}",
                            field=name, role=role) from exc


def mask_from_b64(value: Any, name: str, role: str) -> np.ndarray:
    data = _b64_bytes(value, name, role)
    try:
        return decode_mask_png(data)
    except Exception as exc:
        raise ProtocolError(f"field {name!r} is not a decodable mask PNG: {exc}",
                            field=name, role=role) from exc


def grad_from_b64(value: Any, width: int, height: int, name: str,
                  role: str) -> np.ndarray:
    data = _b64_bytes(value, name, role)
    expected = width * height * 4
    if len(data) != expected:
        raise ProtocolError(
            f"field {name!r} holds {len(data)} bytes, expected {expected} "
            f"for {width}x{height} float32", field=name, role=role)
    return np.frombuffer(data, dtype=np.float32).reshape(height, width).copy()


def _require(payload: dict, name: str, role: str) -> Any:
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be a JSON object", field=name,
                            role=role)
    if name not in payload or payload[name] is None:
        raise ProtocolError(f"missing field {name!r}", field=name, role=role)
    return payload[name]


def _int_field(payload: dict, name: str, role: str) -> int:
    value = _require(payload, name, role)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProtocolError(f"field {name!r} must be an integer", field=name,
                            role=role)
    return value


def _float_field(payload: dict, name: str, role: str) -> float:
    value = _require(payload, name, role)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"field {name!r} must be a number", field=name,
                            role=role)
    return float(value)


def _str_field(payload: dict, name: str, role: str) -> str:
    value = _require(payload, name, role)
    if not isinstance(value, str) or not value:
        raise ProtocolError(f"field {name!r} must be a non-empty string",
                            field=name, role=role)
    return value


def _vector_field(payload: dict, name: str, role: str) -> np.ndarray:
    value = _require(payload, name, role)
    if (not isinstance(value, list) or not value
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in value)):
        raise ProtocolError(f"field {name!r} must be a non-empty number list",
                            field=name, role=role)
    return np.asarray(value, dtype=np.float64)


def _bbox_field(payload: dict, name: str, role: str) -> BoundingBox:
    value = _require(payload, name, role)
    if (not isinstance(value, list) or len(value) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool)
                       for v in value)):
        raise ProtocolError(f"field {name!r} must be [x, y, w, h] integers",
                            field=name, role=role)
    try:
        return BoundingBox(*value)
    except ValueError as exc:
        raise ProtocolError(f"field {name!r}: {exc}", field=name,
                            role=role) from exc


# -- request/response types --------------------------------------------------

@dataclass
class SegmentRequest:
    image: np.ndarray

    role = "segment"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "SegmentRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class SegmentBody:
    mask: np.ndarray
    bbox: BoundingBox
    confidence: float


@dataclass
class SegmentResponse:
    bodies: list[SegmentBody]

    role = "segment"

    def to_payload(self) -> dict:
        return {"bodies": [{"mask": mask_to_b64(b.mask),
                            "bbox": b.bbox.as_list(),
                            "confidence": float(b.confidence)}
                           for b in self.bodies]}

    @classmethod
    def from_payload(cls, payload: dict) -> "SegmentResponse":
        raw = _require(payload, "bodies", cls.role)
        if not isinstance(raw, list):
            raise ProtocolError("field 'bodies' must be a list",
                                field="bodies", role=cls.role)
        bodies = []
        for item in raw:
            bodies.append(SegmentBody(
                mask=mask_from_b64(_require(item, "mask", cls.role), "mask",
                                   cls.role),
                bbox=_bbox_field(item, "bbox", cls.role),
                confidence=_float_field(item, "confidence", cls.role)))
        return cls(bodies=bodies)


@dataclass
class PoseRequest:
    image: np.ndarray

    role = "pose"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "PoseRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class PoseResponse:
    """One (18, 3) array of (x, y, confidence) rows per detected body."""

    keypoint_sets: list[np.ndarray]

    role = "pose"

    def to_payload(self) -> dict:
        return {"keypoint_sets": [np.asarray(k, dtype=np.float64).tolist()
                                  for k in self.keypoint_sets]}

    @classmethod
    def from_payload(cls, payload: dict) -> "PoseResponse":
        raw = _require(payload, "keypoint_sets", cls.role)
        if not isinstance(raw, list):
            raise ProtocolError("field 'keypoint_sets' must be a list",
                                field="keypoint_sets", role=cls.role)
        sets = []
        for item in raw:
            arr = np.asarray(item, dtype=np.float64)
            if arr.shape != (18, 3):
                raise ProtocolError(
                    f"keypoint set must be 18x3, got {arr.shape}",
                    field="keypoint_sets", role=cls.role)
            sets.append(arr)
        return cls(keypoint_sets=sets)


@dataclass
class EdgesRequest:
    image: np.ndarray

    role = "edges"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "EdgesRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class EdgesResponse:
    edge_map: np.ndarray

    role = "edges"

    def to_payload(self) -> dict:
        return {"edge_map": image_to_b64(self.edge_map)}

    @classmethod
    def from_payload(cls, payload: dict) -> "EdgesResponse":
        return cls(edge_map=image_from_b64(
            _require(payload, "edge_map", cls.role), "edge_map", cls.role))


@dataclass
class EmbedRequest:
    image: np.ndarray

    role = "embed"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "EmbedRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class EmbedResponse:
    embedding: np.ndarray
    activity: str

    role = "embed"

    def to_payload(self) -> dict:
        return {"embedding": self.embedding.tolist(), "activity": self.activity}

    @classmethod
    def from_payload(cls, payload: dict) -> "EmbedResponse":
        return cls(embedding=_vector_field(payload, "embedding", cls.role),
                   activity=_str_field(payload, "activity", cls.role))


@dataclass
class InpaintRequest:
    image: np.ndarray
    mask: np.ndarray
    seed: int = 0

    role = "inpaint"

    def __post_init__(self):
        validate_image(self.image)
        validate_mask(self.mask, shape=self.image.shape[:2])

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image),
                "mask": mask_to_b64(self.mask), "seed": int(self.seed)}

    @classmethod
    def from_payload(cls, payload: dict) -> "InpaintRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role),
                   mask=mask_from_b64(_require(payload, "mask", cls.role),
                                      "mask", cls.role),
                   seed=_int_field(payload, "seed", cls.role))


@dataclass
class GenerationRequest:
    """Conditioning bundle for the generative backend.

    masked_image is the scene with the fill region zeroed; mask marks that
    region; pose_map and edge_map are rendered full-size conditioning images.
    """

    masked_image: np.ndarray
    mask: np.ndarray
    pose_map: np.ndarray
    edge_map: np.ndarray
    guide_embedding: np.ndarray
    steps: int = DEFAULT_STEPS
    seed: int = 0

    role = "generate"

    def __post_init__(self):
        shape = validate_image(self.masked_image).shape
        validate_mask(self.mask, shape=shape[:2])
        for name, img in (("pose_map", self.pose_map),
                          ("edge_map", self.edge_map)):
            if validate_image(img).shape != shape:
                raise ValueError(f"{name} shape {img.shape} does not match "
                                 f"masked_image {shape}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.masked_image),
                "mask": mask_to_b64(self.mask),
                "pose_map": image_to_b64(self.pose_map),
                "edge_map": image_to_b64(self.edge_map),
                "guide_embedding": self.guide_embedding.tolist(),
                "steps": int(self.steps), "seed": int(self.seed)}

    @classmethod
    def from_payload(cls, payload: dict) -> "GenerationRequest":
        steps = _int_field(payload, "steps", cls.role)
        if steps < 1:
            raise ProtocolError(f"field 'steps' must be >= 1, got {steps}",
                                field="steps", role=cls.role)
        return cls(
            masked_image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role),
            mask=mask_from_b64(_require(payload, "mask", cls.role), "mask",
                               cls.role),
            pose_map=image_from_b64(_require(payload, "pose_map", cls.role),
                                    "pose_map", cls.role),
            edge_map=image_from_b64(_require(payload, "edge_map", cls.role),
                                    "edge_map", cls.role),
            guide_embedding=_vector_field(payload, "guide_embedding", cls.role),
            steps=steps,
            seed=_int_field(payload, "seed", cls.role))


@dataclass
class FaceswapRequest:
    image: np.ndarray
    box: BoundingBox
    guide_embedding: np.ndarray

    role = "faceswap"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image), "box": self.box.as_list(),
                "guide_embedding": self.guide_embedding.tolist()}

    @classmethod
    def from_payload(cls, payload: dict) -> "FaceswapRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role),
                   box=_bbox_field(payload, "box", cls.role),
                   guide_embedding=_vector_field(payload, "guide_embedding",
                                                 cls.role))


@dataclass
class EnhanceRequest:
    image: np.ndarray
    box: BoundingBox

    role = "enhance"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image), "box": self.box.as_list()}

    @classmethod
    def from_payload(cls, payload: dict) -> "EnhanceRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role),
                   box=_bbox_field(payload, "box", cls.role))


@dataclass
class ImageResponse:
    """Shared response shape for inpaint, generate, faceswap and enhance."""

    image: np.ndarray

    role = "image"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "ImageResponse":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class DetectRequest:
    image: np.ndarray

    role = "detect"

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "DetectRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class DetectResponse:
    detections: list[Detection]

    role = "detect"

    def to_payload(self) -> dict:
        return {"detections": [{"bbox": d.box.as_list(),
                                "objectness": float(d.objectness)}
                               for d in self.detections]}

    @classmethod
    def from_payload(cls, payload: dict) -> "DetectResponse":
        raw = _require(payload, "detections", cls.role)
        if not isinstance(raw, list):
            raise ProtocolError("field 'detections' must be a list",
                                field="detections", role=cls.role)
        dets = []
        for item in raw:
            objectness = _float_field(item, "objectness", cls.role)
            if not 0.0 <= objectness <= 1.0:
                raise ProtocolError(
                    f"field 'objectness' must be in [0, 1], got {objectness}",
                    field="objectness", role=cls.role)
            dets.append(Detection(box=_bbox_field(item, "bbox", cls.role),
                                  objectness=objectness))
        return cls(detections=dets)


@dataclass
class DetectGradRequest:
    image: np.ndarray

    role = GRAD_ROLE

    def to_payload(self) -> dict:
        return {"image": image_to_b64(self.image)}

    @classmethod
    def from_payload(cls, payload: dict) -> "DetectGradRequest":
        return cls(image=image_from_b64(_require(payload, "image", cls.role),
                                        "image", cls.role))


@dataclass
class DetectGradResponse:
    grad: np.ndarray

    role = GRAD_ROLE

    def to_payload(self) -> dict:
        h, w = self.grad.shape
        return {"grad": grad_to_b64(self.grad), "width": int(w),
                "height": int(h)}

    @classmethod
    def from_payload(cls, payload: dict) -> "DetectGradResponse":
        width = _int_field(payload, "width", cls.role)
        height = _int_field(payload, "height", cls.role)
        if width < 1 or height < 1:
            raise ProtocolError("grad dimensions must be positive",
                                field="width", role=cls.role)
        return cls(grad=grad_from_b64(_require(payload, "grad", cls.role),
                                      width, height, "grad", cls.role))


REQUEST_TYPES = {
    "segment": SegmentRequest,
    "pose": PoseRequest,
    "edges": EdgesRequest,
    "embed": EmbedRequest,
    "inpaint": InpaintRequest,
    "generate": GenerationRequest,
    "faceswap": FaceswapRequest,
    "enhance": EnhanceRequest,
    "detect": DetectRequest,
    GRAD_ROLE: DetectGradRequest,
}

RESPONSE_TYPES = {
    "segment": SegmentResponse,
    "pose": PoseResponse,
    "edges": EdgesResponse,
    "embed": EmbedResponse,
    "inpaint": ImageResponse,
    "generate": ImageResponse,
    "faceswap": ImageResponse,
    "enhance": ImageResponse,
    "detect": DetectResponse,
    GRAD_ROLE: DetectGradResponse,
}


def payload_equal(a, b) -> bool:
    """Field-wise equality that treats numpy arrays by value."""
    if type(a) is not type(b):
        return False
    for f in fields(a):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, np.ndarray) or isinstance(vb, np.ndarray):
            if not (isinstance(va, np.ndarray) and isinstance(vb, np.ndarray)
                    and va.shape == vb.shape and np.array_equal(va, vb)):
                return False
        elif isinstance(va, list):
            if (not isinstance(vb, list) or len(va) != len(vb)
                    or not all(_item_equal(x, y) for x, y in zip(va, vb))):
                return False
        elif va != vb:
            return False
    return True


def _item_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (isinstance(a, np.ndarray) and isinstance(b, np.ndarray)
                and a.shape == b.shape and bool(np.array_equal(a, b)))
    if hasattr(a, "__dataclass_fields__"):
        return payload_equal(a, b)
    return a == b
