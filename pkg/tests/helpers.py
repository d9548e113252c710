"""Shared test oracles and synthetic-image builders.

The oracles here are deliberately independent of the library code paths:
guide selection is an exhaustive python loop, top-K is a full sort, and the
image builders place flat-color bodies whose properties (saturation, mean
brightness) are known by construction.
"""

from __future__ import annotations

import itertools

import numpy as np

from bodyanon.manifold import BodyManifold, ManifoldEntry, build_manifold

# Channel permutations of a single palette keep saturation (max-min = 167)
# and mean gray (191) constant, so every body looks identical to the mock
# detector's brightness feature while staying visually distinct.
BODY_PALETTES = tuple(itertools.permutations((250, 240, 83)))

BACKGROUND_GRAY = 120


def make_body_image(shape: tuple[int, int], boxes,
                    background: int = BACKGROUND_GRAY) -> np.ndarray:
    """Flat background with one flat palette rectangle per box.

    Boxes may be (x, y, w, h) tuples or BoundingBox instances.
    """
    img = np.full((shape[0], shape[1], 3), background, dtype=np.uint8)
    for index, box in enumerate(boxes):
        x, y, w, h = box if isinstance(box, tuple) else box.as_list()
        img[y:y + h, x:x + w] = BODY_PALETTES[index % len(BODY_PALETTES)]
    return img


def random_body_boxes(rng: np.random.Generator, shape: tuple[int, int],
                      count: int, min_side: int = 16, max_side: int = 40,
                      ) -> list[tuple[int, int, int, int]]:
    """Disjoint body boxes with a clearance margin between them."""
    height, width = shape
    boxes: list[tuple[int, int, int, int]] = []
    attempts = 0
    while len(boxes) < count:
        attempts += 1
        if attempts > 10000:
            raise RuntimeError("could not place disjoint boxes")
        # an unlucky early placement can strand the rest; start over
        if attempts % 250 == 0:
            boxes.clear()
        w = int(rng.integers(min_side, max_side + 1))
        h = int(rng.integers(min_side, max_side + 1))
        if width - w - 2 <= 2 or height - h - 2 <= 2:
            continue
        x = int(rng.integers(2, width - w - 2))
        y = int(rng.integers(2, height - h - 2))
        clear = all(
            x + w + 3 <= bx or bx + bw + 3 <= x
            or y + h + 3 <= by or by + bh + 3 <= y
            for bx, by, bw, bh in boxes)
        if clear:
            boxes.append((x, y, w, h))
    return boxes


# -- manifold oracles --------------------------------------------------------

def oracle_distance(query: np.ndarray, entry: ManifoldEntry) -> float:
    """Stored embeddings are exactly unit norm, so 1 - q_unit . e."""
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    q = q / np.linalg.norm(q)
    return 1.0 - float(np.dot(q, entry.embedding))


def oracle_select_guide(m: BodyManifold, query,
                        activity: str) -> ManifoldEntry | None:
    """Exhaustive scan: max distance, ties to the smallest id."""
    best: ManifoldEntry | None = None
    best_key: tuple | None = None
    for entry in m.entries:
        if entry.activity != activity:
            continue
        key = (-oracle_distance(query, entry), entry.id)
        if best_key is None or key < best_key:
            best, best_key = entry, key
    return best


def oracle_farthest(m: BodyManifold, query, k: int) -> list[ManifoldEntry]:
    """Full sort by (-distance, id), then truncate."""
    ranked = sorted(m.entries,
                    key=lambda e: (-oracle_distance(query, e), e.id))
    return ranked[:min(k, len(ranked))]


def random_manifold(rng: np.random.Generator, n_classes: int, per_class: int,
                    dim: int, extra_per_class: int = 0,
                    duplicate_pair: bool = False) -> BodyManifold:
    """Random balanced manifold; optionally plants an exact duplicate
    embedding under two ids in one class to force distance ties."""
    entries = []
    for c in range(n_classes):
        activity = f"activity-{c:02d}"
        count = per_class + int(rng.integers(0, extra_per_class + 1))
        for i in range(count):
            entries.append(ManifoldEntry.create(
                id=f"{activity}-e{i:03d}", activity=activity,
                embedding=rng.standard_normal(dim)))
    if duplicate_pair and entries:
        victim = entries[int(rng.integers(len(entries)))]
        entries.append(ManifoldEntry(
            id=victim.id + "-twin", activity=victim.activity,
            embedding=victim.embedding.copy()))
    return build_manifold(entries, per_class_count=per_class, dim=dim)


def mock_activity_manifold(rng: np.random.Generator, per_class: int = 6,
                           dim: int = 32) -> BodyManifold:
    """Manifold whose classes match the mock embed backend's vocabulary."""
    entries = []
    for c in range(4):
        activity = f"mock-activity-{c}"
        for i in range(per_class):
            entries.append(ManifoldEntry.create(
                id=f"{activity}-e{i:03d}", activity=activity,
                embedding=rng.standard_normal(dim)))
    return build_manifold(entries, per_class_count=per_class, dim=dim)


# -- reid oracle -------------------------------------------------------------

def oracle_reid(query_embeddings, query_labels, gallery_embeddings,
                gallery_labels, ks) -> tuple[float, dict[int, float]]:
    """Rank-k and mAP computed with explicit python loops."""
    q = np.asarray(query_embeddings, dtype=np.float64)
    g = np.asarray(gallery_embeddings, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    g = g / np.linalg.norm(g, axis=1, keepdims=True)

    hits = {k: 0 for k in ks}
    aps = []
    for qi in range(q.shape[0]):
        sims = [float(np.dot(q[qi], g[gi])) for gi in range(g.shape[0])]
        # descending similarity, stable in gallery order for exact ties
        order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
        ranked_match = [gallery_labels[i] == query_labels[qi] for i in order]
        first = ranked_match.index(True)
        for k in ks:
            if first < k:
                hits[k] += 1
        precisions = []
        seen = 0
        for position, matched in enumerate(ranked_match, start=1):
            if matched:
                seen += 1
                precisions.append(seen / position)
        aps.append(sum(precisions) / len(precisions))
    n = q.shape[0]
    return (100.0 * sum(aps) / n,
            {k: 100.0 * hits[k] / n for k in ks})


# -- hub instrumentation -----------------------------------------------------

class RecordingHub:
    """Wraps a hub, recording every (role, request) pair it forwards."""

    def __init__(self, inner):
        self.inner = inner
        self.requests: list[tuple[str, object]] = []

    def call(self, role: str, request):
        self.requests.append((role, request))
        return self.inner.call(role, request)

    def by_role(self, role: str) -> list:
        return [req for r, req in self.requests if r == role]
