"""Evaluation kernels: PSNR, Frechet/FID, re-identification, detection rates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

PSNR_PEAK = 255.0
EIGENVALUE_CLAMP = 1e-10


class NumericError(ArithmeticError):
    """A computation left the numerically trustworthy regime."""


class ReidValidationError(ValueError):
    pass


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when images are identical."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PSNR_PEAK * PSNR_PEAK / mse)


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"inconsistent moment shapes: mean {mean.shape}, "
                             f"covariance {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-9, rtol=0.0):
            raise ValueError("covariance must be symmetric within 1e-9")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", (cov + cov.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mean.size


def _psd_sqrt(matrix: np.ndarray, label: str) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    tolerance = EIGENVALUE_CLAMP * max(1.0, float(np.abs(values).max(initial=0.0)))
    if values.min(initial=0.0) < -tolerance:
        raise NumericError(f"{label} is not PSD: eigenvalue "
                           f"{values.min():.3e} below -{tolerance:.3e}")
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def frechet_distance(p: GaussianMoments, q: GaussianMoments) -> float:
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), always >= 0.

    The cross term is computed as the trace of the PSD square root of
    S1^(1/2) S2 S1^(1/2), which keeps every step inside real symmetric
    eigenproblems.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    mean_term = float(np.sum((p.mean - q.mean) ** 2))
    root_p = _psd_sqrt(p.covariance, "first covariance")
    inner = root_p @ q.covariance @ root_p
    inner = (inner + inner.T) / 2.0
    values = np.linalg.eigh(inner)[0]
    tolerance = EIGENVALUE_CLAMP * max(1.0, float(np.abs(values).max(initial=0.0)))
    if values.min(initial=0.0) < -tolerance:
        raise NumericError(f"cross covariance product is not PSD: eigenvalue "
                           f"{values.min():.3e} below -{tolerance:.3e}")
    trace_sqrt = float(np.sum(np.sqrt(np.clip(values, 0.0, None))))
    distance = (mean_term + float(np.trace(p.covariance))
                + float(np.trace(q.covariance)) - 2.0 * trace_sqrt)
    return max(0.0, distance)


def sample_moments(embeddings) -> GaussianMoments:
    matrix = np.asarray(embeddings, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError(f"need at least 2 embeddings of equal dimension, "
                         f"got shape {matrix.shape}")
    mean = matrix.mean(axis=0)
    covariance = np.atleast_2d(np.cov(matrix, rowvar=False, ddof=1))
    return GaussianMoments(mean=mean, covariance=covariance)


def fid(a, b) -> float:
    """Frechet distance between the sample moments of two embedding sets."""
    return frechet_distance(sample_moments(a), sample_moments(b))


@dataclass(frozen=True)
class ReidInstance:
    query_embeddings: np.ndarray
    query_labels: tuple[str, ...]
    gallery_embeddings: np.ndarray
    gallery_labels: tuple[str, ...]

    def __post_init__(self):
        q = np.asarray(self.query_embeddings, dtype=np.float64)
        g = np.asarray(self.gallery_embeddings, dtype=np.float64)
        if q.ndim != 2 or g.ndim != 2 or q.shape[1] != g.shape[1]:
            raise ValueError(f"embedding dimensions differ: query {q.shape}, "
                             f"gallery {g.shape}")
        ql = tuple(self.query_labels)
        gl = tuple(self.gallery_labels)
        if len(ql) != q.shape[0] or len(gl) != g.shape[0]:
            raise ValueError("label count does not match embedding count")
        if not all(isinstance(label, str) and label for label in ql + gl):
            raise ValueError("every label must be a non-empty string")
        object.__setattr__(self, "query_embeddings", q)
        object.__setattr__(self, "gallery_embeddings", g)
        object.__setattr__(self, "query_labels", ql)
        object.__setattr__(self, "gallery_labels", gl)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("embeddings must be non-zero")
    return matrix / norms


def reid_eval(instance: ReidInstance, ks: tuple[int, ...] = (1, 5, 10, 20),
              ) -> tuple[float, dict[int, float]]:
    """Market-style retrieval scores: (mAP %, {k: Rank-k %}).

    Gallery is ranked by descending cosine similarity per query; Rank-k is
    the fraction of queries with a correct match in the top k; average
    precision runs over all relevant gallery items.
    """
    gallery_set = set(instance.gallery_labels)
    for label in instance.query_labels:
        if label not in gallery_set:
            raise ReidValidationError(
                f"query label {label!r} absent from gallery")
    if min(ks, default=0) < 1:
        raise ValueError("every k must be >= 1")

    queries = _unit_rows(instance.query_embeddings)
    gallery = _unit_rows(instance.gallery_embeddings)
    gallery_labels = np.asarray(instance.gallery_labels)
    similarities = queries @ gallery.T

    hits_at = {k: 0 for k in ks}
    average_precisions = []
    for row, label in zip(similarities, instance.query_labels):
        order = np.argsort(-row, kind="stable")
        matches = gallery_labels[order] == label
        positions = np.flatnonzero(matches)
        for k in ks:
            if positions.size and positions[0] < k:
                hits_at[k] += 1
        precision = np.cumsum(matches)[positions] / (positions + 1.0)
        average_precisions.append(float(precision.mean()))

    count = float(len(instance.query_labels))
    rank_k = {k: 100.0 * hits_at[k] / count for k in ks}
    return 100.0 * float(np.mean(average_precisions)), rank_k


def detection_delta(before, after, detector, threshold: float = 0.5,
                    ) -> tuple[float, float]:
    """Percent of images with a detection above threshold, before and after."""
    if len(before) != len(after):
        raise ValueError(f"image lists must align 1:1, got {len(before)} "
                         f"and {len(after)}")
    if not before:
        raise ValueError("image lists must be non-empty")

    def accuracy(images) -> float:
        found = sum(
            1 for image in images
            if any(d.objectness > threshold for d in detector.score(image)))
        return 100.0 * found / len(images)

    return accuracy(before), accuracy(after)


@dataclass
class EvalReport:
    """One row of results; fields that were not measured stay None."""

    dataset: str
    humans: int
    accuracy_before: float | None = None
    accuracy_after: float | None = None
    psnr: float | None = None
    fid: float | None = None
    map: float | None = None
    rank_k: dict[int, float] | None = None

    def __post_init__(self):
        for name in ("accuracy_before", "accuracy_after", "map"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 100.0:
                raise ValueError(f"{name} must be in [0, 100], got {value}")
        if self.rank_k is not None:
            items = sorted(self.rank_k.items())
            values = [v for _, v in items]
            if any(not 0.0 <= v <= 100.0 for v in values):
                raise ValueError("rank_k percentages must be in [0, 100]")
            if any(b < a for a, b in zip(values, values[1:])):
                raise ValueError("rank_k must be non-decreasing in k")

    def as_dict(self) -> dict:
        out: dict = {"dataset": self.dataset, "humans": self.humans}
        for name in ("accuracy_before", "accuracy_after", "fid", "map"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.psnr is not None:
            out["psnr"] = "inf" if math.isinf(self.psnr) else self.psnr
        if self.rank_k is not None:
            out["rank_k"] = {str(k): v for k, v in sorted(self.rank_k.items())}
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def text_table(self) -> str:
        columns: list[tuple[str, str]] = [("Dataset", self.dataset),
                                          ("Humans", str(self.humans))]
        if self.accuracy_before is not None:
            columns.append(("Acc. before", f"{self.accuracy_before:.2f}"))
        if self.accuracy_after is not None:
            columns.append(("Acc. after", f"{self.accuracy_after:.2f}"))
        if self.psnr is not None:
            rendered = "inf" if math.isinf(self.psnr) else f"{self.psnr:.2f}"
            columns.append(("PSNR", rendered))
        if self.fid is not None:
            columns.append(("FID", f"{self.fid:.2f}"))
        if self.map is not None:
            columns.append(("mAP", f"{self.map:.1f}"))
        if self.rank_k is not None:
            for k, value in sorted(self.rank_k.items()):
                columns.append((f"Rank{k}", f"{value:.1f}"))
        widths = [max(len(h), len(v)) for h, v in columns]
        header = "  ".join(h.ljust(w) for (h, _), w in zip(columns, widths))
        values = "  ".join(v.ljust(w) for (_, v), w in zip(columns, widths))
        return header + "\n" + values
