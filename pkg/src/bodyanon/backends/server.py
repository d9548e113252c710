"""HTTP server exposing the mock hub, one route per role."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import ProtocolError
from .mock import DEFAULT_EMBED_DIM, MockHub
from .wire import GRAD_ROLE, REQUEST_TYPES, ROLES, role_path

logger = logging.getLogger(__name__)


def create_mock_app(seed: int = 0,
                    embed_dim: int = DEFAULT_EMBED_DIM) -> FastAPI:
    hub = MockHub(seed=seed, embed_dim=embed_dim)
    app = FastAPI(title="mock model backends")
    app.state.hub = hub

    def register(role: str) -> None:
        async def handle(request: Request) -> JSONResponse:
            try:
                payload = await request.json()
            except Exception:
                return JSONResponse({"error": "body is not JSON"},
                                    status_code=400)
            try:
                typed = REQUEST_TYPES[role].from_payload(payload)
                result = hub.call(role, typed)
            except ProtocolError as exc:
                return JSONResponse({"error": str(exc), "field": exc.field},
                                    status_code=422)
            return JSONResponse(result.to_payload())

        app.post(role_path(role))(handle)

    for name in ROLES:
        register(name)
    register(GRAD_ROLE)

    @app.get("/v1/health")
    async def health() -> dict:
        return {"status": "ok", "seed": hub.seed}

    return app
