"""Error taxonomy for backend calls."""

from __future__ import annotations


class BackendError(Exception):
    """Base for everything raised by backend plumbing; carries the role."""

    def __init__(self, message: str, role: str | None = None):
        super().__init__(message)
        self.role = role


class ConfigurationError(BackendError):
    """Unknown role or missing endpoint."""


class ProtocolError(BackendError):
    """Payload violates the wire schema; names the offending field."""

    def __init__(self, message: str, field: str, role: str | None = None):
        super().__init__(message, role=role)
        self.field = field


class BackendTimeoutError(BackendError):
    """The backend did not answer within the deadline."""


class RemoteCallError(BackendError):
    """Transport failed twice or the backend answered with an error status."""
