"""HTTP gateway: upload an image, pick options per body, poll the job."""

from __future__ import annotations

import hashlib
import json
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from ..backends.client import HttpHub
from ..manifold import read_manifold
from ..pipeline import (AnonymizationChoice, AnonymizationRequest,
                        InvalidOptionError, anonymize, detect_bodies)
from ..raster import decode_png, encode_png
from .config import ServiceConfig
from .store import DONE, FAILED, RUNNING, ImageStore, JobStore, NotFoundError

logger = logging.getLogger(__name__)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(config: ServiceConfig, hub=None, body_manifold=None,
               face_manifold=None) -> FastAPI:
    if hub is None:
        config.validate_endpoints()
        hub = HttpHub(config.endpoints)

    store_root = Path(config.store_dir)
    images = ImageStore(store_root / "images")
    jobs = JobStore(store_root)
    executor = ThreadPoolExecutor(max_workers=config.workers)

    if body_manifold is None and config.body_manifold:
        body_manifold = read_manifold(config.body_manifold)
    if face_manifold is None and config.face_manifold:
        face_manifold = read_manifold(config.face_manifold)

    # body summaries per image, so submits validate without re-detection
    known_bodies: dict[str, dict[str, dict]] = {}

    app = FastAPI(title="body anonymization gateway")
    app.state.hub = hub
    app.state.images = images
    app.state.jobs = jobs
    app.state.config = config
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.middleware("http")
    async def correlation(request: Request, call_next):
        correlation_id = request.headers.get("x-correlation-id",
                                             uuid.uuid4().hex)
        response = await call_next(request)
        response.headers["x-correlation-id"] = correlation_id
        return response

    def summarize(image_id: str, image) -> list[dict]:
        bodies = detect_bodies(image, hub)
        summaries = [{"body_id": b.body_id, "bbox": b.bbox.as_list(),
                      "confidence": b.confidence} for b in bodies]
        known_bodies[image_id] = {s["body_id"]: s for s in summaries}
        return summaries

    @app.post("/v1/images")
    async def submit_image(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = next((v for v in form.values() if hasattr(v, "read")),
                          None)
            if upload is None:
                return _error(400, "multipart body carries no file field")
            data = await upload.read()
        else:
            data = await request.body()
        if not data:
            return _error(400, "empty request body")
        if len(data) > config.max_upload_bytes:
            return _error(413, f"payload exceeds {config.max_upload_bytes} "
                               f"byte limit")
        try:
            image = decode_png(data)
        except Exception:
            return _error(400, "body is not a decodable PNG or JPEG image")
        image_id = images.put(data)
        summaries = summarize(image_id, image)
        return {"image_id": image_id, "bodies": summaries}

    @app.get("/v1/images/{image_id}")
    async def get_image(image_id: str):
        try:
            data = images.get(image_id)
        except NotFoundError:
            return _error(404, f"unknown image_id {image_id!r}")
        return Response(content=data, media_type="image/png")

    def run_job(job_id: str, image_id: str, choices: list[tuple[str, str]],
                seed: int) -> None:
        jobs.transition(job_id, RUNNING)
        try:
            image = decode_png(images.get(image_id))
            parsed = [(body_id, AnonymizationChoice.parse(option))
                      for body_id, option in choices]
            warnings: list[str] = []
            result = anonymize(
                AnonymizationRequest(image=image, choices=parsed, seed=seed,
                                     config=config.pipeline_config()),
                hub, manifold=body_manifold, face_manifold=face_manifold,
                warnings=warnings)
            result_id = images.put(encode_png(result))
            jobs.transition(job_id, DONE, result_image=result_id,
                            warnings=warnings)
        except Exception as exc:
            logger.exception("job %s failed", job_id)
            jobs.transition(job_id, FAILED, error=str(exc))

    @app.post("/v1/anonymize")
    async def submit_anonymize(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _error(400, "body is not JSON")
        image_id = payload.get("image_id")
        if not isinstance(image_id, str) or image_id not in images:
            return _error(404, f"unknown image_id {image_id!r}")
        seed = payload.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            return _error(422, "seed must be an integer")
        raw_choices = payload.get("choices")
        if not isinstance(raw_choices, list):
            return _error(422, "choices must be a list of "
                               "{body_id, option} objects")

        if image_id not in known_bodies:
            summarize(image_id, decode_png(images.get(image_id)))
        known = known_bodies[image_id]

        choices: list[tuple[str, str]] = []
        seen: set[str] = set()
        for item in raw_choices:
            if not isinstance(item, dict):
                return _error(422, "each choice must be a JSON object")
            body_id = item.get("body_id")
            option = item.get("option")
            if body_id not in known:
                return _error(404, f"unknown body_id {body_id!r}")
            if body_id in seen:
                return _error(422, f"duplicate choice for body_id {body_id!r}")
            seen.add(body_id)
            try:
                AnonymizationChoice.parse(str(option))
            except InvalidOptionError as exc:
                return _error(422, str(exc))
            choices.append((body_id, str(option)))

        digest = hashlib.sha256(json.dumps(
            {"image_id": image_id, "seed": seed, "choices": choices},
            sort_keys=True).encode("utf-8")).hexdigest()
        job = jobs.create(digest)
        executor.submit(run_job, job.job_id, image_id, choices, seed)
        return {"job_id": job.job_id}

    @app.get("/v1/jobs/{job_id}")
    async def get_job(job_id: str):
        try:
            job = jobs.get(job_id)
        except NotFoundError:
            return _error(404, f"unknown job_id {job_id!r}")
        body = job.to_dict()
        if job.state == DONE:
            body["result_url"] = f"/v1/results/{job.job_id}"
        return body

    @app.get("/v1/results/{job_id}")
    async def get_result(job_id: str):
        try:
            job = jobs.get(job_id)
        except NotFoundError:
            return _error(404, f"unknown job_id {job_id!r}")
        if job.state != DONE or job.result_image is None:
            return _error(409, f"job {job_id} is {job.state}, not done")
        return Response(content=images.get(job.result_image),
                        media_type="image/png")

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    return app
