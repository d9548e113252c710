"""Balanced, activity-labeled embedding store and guide-selection search.

The manifold holds one unit-norm embedding per exemplar body (or face),
grouped into activity classes of equal size.  Guide selection returns the
exemplar whose embedding is at maximal cosine distance from a query, either
restricted to the query's activity class or drawn from a randomized
farthest-K candidate set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIM = 512
MANIFOLD_FORMAT = "mbmc-manifold"
MANIFOLD_VERSION = 1

# Decimal precision used both in memory and on disk, so that writing and
# re-reading a manifold is an exact identity.
FLOAT_DIGITS = 9

NORM_TOLERANCE = 1e-6


class ManifoldError(Exception):
    """Base class for manifold construction and query failures."""


class DuplicateIdError(ManifoldError):
    pass


class InsufficientClassError(ManifoldError):
    """An activity class has fewer entries than the per-class quota."""

    def __init__(self, activity: str, have: int, need: int):
        self.activity = activity
        super().__init__(
            f"activity class {activity!r} has {have} entries, needs {need}"
        )


class UnknownActivityError(ManifoldError):
    def __init__(self, activity: str):
        self.activity = activity
        super().__init__(f"activity class {activity!r} not present in manifold")


class ManifoldParseError(ManifoldError):
    """Malformed manifold file; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class ManifoldValidationError(ManifoldError):
    pass


def _quantize(values: np.ndarray) -> np.ndarray:
    # Decimal round-trip keeps in-memory values bit-identical to the file format.
    return np.array([float(f"{v:.{FLOAT_DIGITS}g}") for v in values.tolist()],
                    dtype=np.float64)


def normalize_embedding(values, dim: int | None = None) -> np.ndarray:
    """Return a unit-norm float64 copy of `values`, quantized to the store precision.

    Raises ValueError on a zero vector or, when `dim` is given, on a length
    mismatch.
    """
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if dim is not None and vec.shape[0] != dim:
        raise ValueError(f"embedding has dimension {vec.shape[0]}, expected {dim}")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("embedding must be non-zero")
    return _quantize(vec / norm)


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2]; 0 iff the vectors point the same way.

    Scale-invariant: inputs need not be unit norm.  Raises ValueError on
    dimension mismatch or a zero vector.
    """
    va = np.asarray(a, dtype=np.float64).reshape(-1)
    vb = np.asarray(b, dtype=np.float64).reshape(-1)
    if va.shape[0] != vb.shape[0]:
        raise ValueError(
            f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}"
        )
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance undefined for zero vectors")
    cos = float(np.dot(va, vb)) / (na * nb)
    return 1.0 - min(1.0, max(-1.0, cos))


@dataclass(frozen=True)
class ManifoldEntry:
    """One labeled exemplar: id, activity class, unit embedding, optional provenance."""

    id: str
    activity: str
    embedding: np.ndarray
    source_uri: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("entry id must be non-empty")
        if not self.activity:
            raise ValueError("entry activity must be non-empty")

    @classmethod
    def create(cls, id: str, activity: str, embedding, source_uri: str | None = None,
               dim: int | None = None) -> "ManifoldEntry":
        """Build an entry, normalizing the embedding at ingestion."""
        return cls(id=id, activity=activity,
                   embedding=normalize_embedding(embedding, dim),
                   source_uri=source_uri)


@dataclass
class BodyManifold:
    """Immutable after construction; queries are thread-safe reads.

    `entries` is kept in canonical (activity, id) order and `matrix` stacks
    the embeddings row-wise for vectorized distance scans.
    """

    dim: int
    per_class_count: int
    entries: list[ManifoldEntry]
    matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.matrix is None:
            self.matrix = (
                np.stack([e.embedding for e in self.entries])
                if self.entries else np.zeros((0, self.dim))
            )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def activities(self) -> list[str]:
        seen = []
        for e in self.entries:
            if e.activity not in seen:
                seen.append(e.activity)
        return seen


def build_manifold(entries: list[ManifoldEntry], per_class_count: int,
                   dim: int = DEFAULT_DIM) -> BodyManifold:
    """Assemble a balanced manifold: every class trimmed to `per_class_count` entries.

    Subsampling is deterministic (entries sorted by id, first k kept).  A class
    with fewer than `per_class_count` entries raises InsufficientClassError; a
    duplicate id raises DuplicateIdError.
    """
    if per_class_count < 1:
        raise ValueError("per_class_count must be >= 1")
    seen_ids: set[str] = set()
    by_class: dict[str, list[ManifoldEntry]] = {}
    for e in entries:
        if e.id in seen_ids:
            raise DuplicateIdError(f"duplicate entry id {e.id!r}")
        seen_ids.add(e.id)
        if e.embedding.shape[0] != dim:
            raise ValueError(
                f"entry {e.id!r} has dimension {e.embedding.shape[0]}, expected {dim}"
            )
        by_class.setdefault(e.activity, []).append(e)

    kept: list[ManifoldEntry] = []
    for activity in sorted(by_class):
        members = sorted(by_class[activity], key=lambda e: e.id)
        if len(members) < per_class_count:
            raise InsufficientClassError(activity, len(members), per_class_count)
        kept.extend(members[:per_class_count])
    return BodyManifold(dim=dim, per_class_count=per_class_count, entries=kept)


def _distances(m: BodyManifold, query) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != m.dim:
        raise ValueError(f"query has dimension {q.shape[0]}, expected {m.dim}")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("query must be non-zero")
    # Stored rows are unit norm, so this is exactly 1 - cos.
    return 1.0 - m.matrix @ (q / norm)


def select_guide(m: BodyManifold, query, activity: str) -> ManifoldEntry:
    """The same-activity entry at maximal cosine distance from `query`.

    Ties break toward the lexicographically smallest id, which makes the
    result invariant under permutations of the entry list.  Raises
    UnknownActivityError when the class is absent (callers choose the
    fallback policy).
    """
    dist = _distances(m, query)
    best: ManifoldEntry | None = None
    best_dist = -np.inf
    for entry, d in zip(m.entries, dist):
        if entry.activity != activity:
            continue
        if d > best_dist or (d == best_dist and entry.id < best.id):
            best, best_dist = entry, d
    if best is None:
        raise UnknownActivityError(activity)
    return best


def farthest_entries(m: BodyManifold, query, k: int) -> list[ManifoldEntry]:
    """The k entries farthest from `query` over the whole manifold.

    Ordered by decreasing distance with id tie-breaks; k is clamped to the
    entry count.
    """
    dist = _distances(m, query)
    order = sorted(range(len(m.entries)),
                   key=lambda i: (-dist[i], m.entries[i].id))
    return [m.entries[i] for i in order[:min(k, len(m.entries))]]


def select_face_guide(m: BodyManifold, query, sphere_k: int, seed: int) -> ManifoldEntry:
    """One of the `sphere_k` globally farthest entries, chosen by a seeded RNG.

    The candidate set ignores activity classes; sphere_k larger than the
    manifold is clamped, not an error.  A fixed (manifold, query, sphere_k,
    seed) tuple always picks the same entry.
    """
    if sphere_k < 1:
        raise ValueError("sphere_k must be >= 1")
    if len(m.entries) == 0:
        raise ValueError("manifold is empty")
    sphere = farthest_entries(m, query, sphere_k)
    rng = np.random.default_rng(seed)
    return sphere[int(rng.integers(len(sphere)))]


def _format_float(v: float) -> str:
    return f"{v:.{FLOAT_DIGITS}g}"


def write_manifold(m: BodyManifold, destination) -> int:
    """Write newline-delimited JSON records (header first); returns bytes written.

    Output is byte-stable for a given manifold: entry order and float
    formatting are canonical.
    """
    lines = [json.dumps({
        "format": MANIFOLD_FORMAT,
        "version": MANIFOLD_VERSION,
        "dim": m.dim,
        "per_class_count": m.per_class_count,
    }, separators=(",", ":"))]
    for e in m.entries:
        emb = "[" + ",".join(_format_float(v) for v in e.embedding) + "]"
        rec = (
            '{"id":%s,"activity":%s,"embedding":%s,"source_uri":%s}'
            % (json.dumps(e.id), json.dumps(e.activity), emb,
               json.dumps(e.source_uri))
        )
        lines.append(rec)
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    if hasattr(destination, "write"):
        destination.write(payload)
    else:
        with open(destination, "wb") as fh:
            fh.write(payload)
    return len(payload)


def _parse_record(line_no: int, raw: str) -> dict:
    try:
        rec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifoldParseError(line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(rec, dict):
        raise ManifoldParseError(line_no, "record is not a JSON object")
    return rec


def read_manifold(source) -> BodyManifold:
    """Parse a manifold file and re-validate every invariant.

    Malformed records raise ManifoldParseError with the offending line
    number; structural violations (non-unit norms, unbalanced classes,
    duplicate ids) raise ManifoldValidationError.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines:
        raise ManifoldParseError(1, "empty file, header record missing")

    header = _parse_record(1, lines[0])
    if header.get("format") != MANIFOLD_FORMAT:
        raise ManifoldParseError(1, f"unexpected format {header.get('format')!r}")
    if header.get("version") != MANIFOLD_VERSION:
        raise ManifoldParseError(1, f"unsupported version {header.get('version')!r}")
    try:
        dim = int(header["dim"])
        per_class = int(header["per_class_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifoldParseError(1, "header missing dim/per_class_count") from exc

    entries: list[ManifoldEntry] = []
    ids: set[str] = set()
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        rec = _parse_record(line_no, raw)
        for key in ("id", "activity", "embedding"):
            if key not in rec:
                raise ManifoldParseError(line_no, f"missing field {key!r}")
        if not isinstance(rec["embedding"], list):
            raise ManifoldParseError(line_no, "embedding is not an array")
        vec = np.asarray(rec["embedding"], dtype=np.float64)
        if vec.shape[0] != dim:
            raise ManifoldValidationError(
                f"line {line_no}: embedding dimension {vec.shape[0]} != {dim}"
            )
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ManifoldValidationError(
                f"line {line_no}: embedding norm {norm:.6g} is not 1"
            )
        if rec["id"] in ids:
            raise ManifoldValidationError(f"line {line_no}: duplicate id {rec['id']!r}")
        ids.add(rec["id"])
        entries.append(ManifoldEntry(
            id=rec["id"], activity=rec["activity"], embedding=vec,
            source_uri=rec.get("source_uri"),
        ))

    counts: dict[str, int] = {}
    for e in entries:
        counts[e.activity] = counts.get(e.activity, 0) + 1
    for activity, n in counts.items():
        if n != per_class:
            raise ManifoldValidationError(
                f"activity class {activity!r} has {n} entries, expected {per_class}"
            )
    ordered = sorted(entries, key=lambda e: (e.activity, e.id))
    return BodyManifold(dim=dim, per_class_count=per_class, entries=ordered)
