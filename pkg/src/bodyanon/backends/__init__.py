"""Typed backend clients, wire schemas, and deterministic mocks."""

from .client import HttpHub, HubDetector, call_backend
from .errors import (BackendError, BackendTimeoutError, ConfigurationError,
                     ProtocolError, RemoteCallError)
from .mock import MockBackend, MockHub, mock_backend, saturation_components
from .server import create_mock_app
from .wire import (GRAD_ROLE, REQUEST_TYPES, RESPONSE_TYPES, ROLES,
                   DetectGradRequest, DetectGradResponse, DetectRequest,
                   DetectResponse, EdgesRequest, EdgesResponse, EmbedRequest,
                   EmbedResponse, EnhanceRequest, FaceswapRequest,
                   GenerationRequest, ImageResponse, InpaintRequest,
                   PoseRequest, PoseResponse, SegmentBody, SegmentRequest,
                   SegmentResponse, payload_equal, role_path)

__all__ = [
    "BackendError", "BackendTimeoutError", "ConfigurationError",
    "ProtocolError", "RemoteCallError",
    "HttpHub", "HubDetector", "call_backend",
    "MockBackend", "MockHub", "mock_backend", "saturation_components",
    "create_mock_app",
    "GRAD_ROLE", "REQUEST_TYPES", "RESPONSE_TYPES", "ROLES", "role_path",
    "payload_equal",
    "SegmentRequest", "SegmentResponse", "SegmentBody",
    "PoseRequest", "PoseResponse",
    "EdgesRequest", "EdgesResponse",
    "EmbedRequest", "EmbedResponse",
    "InpaintRequest", "GenerationRequest",
    "FaceswapRequest", "EnhanceRequest", "ImageResponse",
    "DetectRequest", "DetectResponse",
    "DetectGradRequest", "DetectGradResponse",
]
