"""Flat content-addressed image store and a persisted job registry."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

QUEUED = "queued"
RUNNING = "running"
DONE = "done"
FAILED = "failed"

_TRANSITIONS = {
    QUEUED: {RUNNING, FAILED},
    RUNNING: {DONE, FAILED},
    DONE: set(),
    FAILED: set(),
}


class NotFoundError(KeyError):
    pass


class InvalidTransitionError(RuntimeError):
    pass


class ImageStore:
    """PNG bytes keyed by their own sha256; identical bytes share one file."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, image_id: str) -> Path:
        return self.root / f"{image_id}.png"

    def put(self, data: bytes) -> str:
        image_id = hashlib.sha256(data).hexdigest()
        target = self._path(image_id)
        if not target.exists():
            scratch = target.with_suffix(f".tmp-{uuid.uuid4().hex}")
            scratch.write_bytes(data)
            os.replace(scratch, target)
        return image_id

    def get(self, image_id: str) -> bytes:
        target = self._path(image_id)
        if not target.exists():
            raise NotFoundError(image_id)
        return target.read_bytes()

    def __contains__(self, image_id: str) -> bool:
        return self._path(image_id).exists()


@dataclass
class Job:
    job_id: str
    state: str = QUEUED
    request_digest: str = ""
    result_image: str | None = None
    warnings: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {"job_id": self.job_id, "state": self.state,
                "request_digest": self.request_digest,
                "result_image": self.result_image,
                "warnings": list(self.warnings), "error": self.error}

    @classmethod
    def from_dict(cls, data: dict) -> "Job":
        return cls(job_id=data["job_id"], state=data["state"],
                   request_digest=data.get("request_digest", ""),
                   result_image=data.get("result_image"),
                   warnings=list(data.get("warnings", [])),
                   error=data.get("error"))


class JobStore:
    """In-memory job table mirrored to a flat index file on every mutation."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "jobs.json"
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._load()

    def _load(self) -> None:
        if not self.index_path.exists():
            return
        data = json.loads(self.index_path.read_text(encoding="utf-8"))
        for item in data.get("jobs", []):
            job = Job.from_dict(item)
            # Work interrupted by a restart can never finish.
            if job.state in (QUEUED, RUNNING):
                job.state = FAILED
                job.error = "interrupted by service restart"
            self._jobs[job.job_id] = job

    def _persist_locked(self) -> None:
        payload = {"jobs": [job.to_dict() for job in self._jobs.values()]}
        scratch = self.index_path.with_suffix(f".tmp-{uuid.uuid4().hex}")
        scratch.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        os.replace(scratch, self.index_path)

    def create(self, request_digest: str) -> Job:
        job = Job(job_id=uuid.uuid4().hex, request_digest=request_digest)
        with self._lock:
            self._jobs[job.job_id] = job
            self._persist_locked()
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFoundError(job_id)
            job = self._jobs[job_id]
            return Job.from_dict(job.to_dict())

    def transition(self, job_id: str, state: str,
                   result_image: str | None = None,
                   warnings: list[str] | None = None,
                   error: str | None = None) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFoundError(job_id)
            job = self._jobs[job_id]
            if state not in _TRANSITIONS[job.state]:
                raise InvalidTransitionError(
                    f"job {job_id} cannot move {job.state} -> {state}")
            job.state = state
            if result_image is not None:
                job.result_image = result_image
            if warnings is not None:
                job.warnings = list(warnings)
            if error is not None:
                job.error = error
            self._persist_locked()
            return Job.from_dict(job.to_dict())
