"""HTTP client for remote backends, plus hub adapters used by the pipeline."""

from __future__ import annotations

import logging

import httpx
import numpy as np

from ..attack import Detection
from .errors import (BackendTimeoutError, ConfigurationError, ProtocolError,
                     RemoteCallError)
from .wire import (DEFAULT_TIMEOUT, GRAD_ROLE, REQUEST_TYPES, RESPONSE_TYPES,
                   ROLES, DetectGradRequest, DetectRequest, role_path)

logger = logging.getLogger(__name__)


def call_backend(role: str, request, endpoint: str,
                 timeout: float = DEFAULT_TIMEOUT,
                 client: httpx.Client | None = None):
    """POST one request to its role path and decode the typed response.

    Transient transport failures are retried exactly once; timeouts are not
    retried (the backend may still be working on the first attempt).
    """
    if role not in REQUEST_TYPES:
        raise ConfigurationError(f"unknown backend role {role!r}", role=role)
    expected = REQUEST_TYPES[role]
    if not isinstance(request, expected):
        raise ProtocolError(
            f"role {role!r} expects {expected.__name__}, "
            f"got {type(request).__name__}", field="request", role=role)
    payload = request.to_payload()
    url = endpoint.rstrip("/") + role_path(role)

    response = None
    for attempt in (1, 2):
        try:
            if client is not None:
                response = client.post(url, json=payload, timeout=timeout)
            else:
                with httpx.Client(timeout=timeout) as own:
                    response = own.post(url, json=payload)
            break
        except httpx.TimeoutException as exc:
            raise BackendTimeoutError(
                f"backend {role!r} timed out after {timeout}s at {url}",
                role=role) from exc
        except httpx.TransportError as exc:
            if attempt == 2:
                raise RemoteCallError(
                    f"backend {role!r} unreachable at {url}: {exc}",
                    role=role) from exc
            logger.warning("transport failure calling %s, retrying once: %s",
                           url, exc)

    if response.status_code != 200:
        raise RemoteCallError(
            f"backend {role!r} answered {response.status_code}: "
            f"{response.text[:200]}", role=role)
    try:
        data = response.json()
    except ValueError as exc:
        raise ProtocolError(f"backend {role!r} response is not JSON",
                            field="body", role=role) from exc
    decoded = RESPONSE_TYPES[role].from_payload(data)
    return decoded


class HttpHub:
    """Role-to-endpoint map with a shared connection pool."""

    def __init__(self, endpoints: dict[str, str],
                 timeout: float = DEFAULT_TIMEOUT):
        unknown = sorted(set(endpoints) - set(ROLES))
        if unknown:
            raise ConfigurationError(
                f"unknown roles in endpoint map: {', '.join(unknown)}",
                role=unknown[0])
        self._endpoints = dict(endpoints)
        self._timeout = timeout
        self._client = httpx.Client(timeout=timeout)

    def endpoint_for(self, role: str) -> str:
        # The gradient side-channel lives on the detect backend.
        lookup = "detect" if role == GRAD_ROLE else role
        if lookup not in self._endpoints:
            raise ConfigurationError(f"no endpoint configured for role "
                                     f"{lookup!r}", role=lookup)
        return self._endpoints[lookup]

    def call(self, role: str, request):
        return call_backend(role, request, self.endpoint_for(role),
                            timeout=self._timeout, client=self._client)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpHub":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class HubDetector:
    """DetectorInterface view over any hub's detect role."""

    def __init__(self, hub):
        self._hub = hub

    def score(self, image: np.ndarray) -> list[Detection]:
        return self._hub.call("detect", DetectRequest(image=image)).detections

    def grad(self, image: np.ndarray) -> np.ndarray:
        return self._hub.call(GRAD_ROLE, DetectGradRequest(image=image)).grad
