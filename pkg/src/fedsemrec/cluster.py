"""Server-side clustering of uploaded item encodings.

The server sees one UploadBatch per client per round, each holding only
item-level mixed-layer encodings. It pools them, runs k-means++ seeded,
distance-weighted k-means, and hands every client back one centroid vector
per item. Nothing user-level exists anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import assign_nearest, weighted_centroid_update


@dataclass
class UploadBatch:
    """One client's upload: mixed-layer encodings for its item range."""

    client_id: str
    encodings: np.ndarray
    offset: int = 0

    def __post_init__(self):
        self.encodings = np.asarray(self.encodings)
        if self.encodings.ndim != 2:
            raise ValueError(f"expected [n_items, dim], got {self.encodings.shape}")
        if not np.isfinite(self.encodings).all():
            raise ValueError("upload contains non-finite values")


@dataclass
class ClusterModel:
    """Fitted centroids plus the per-point assignment over the pooled upload."""

    centroids: np.ndarray
    assignments: np.ndarray
    epsilon: float
    max_iters: int
    shift_tol: float
    iterations_run: int
    client_spans: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed centroids: first uniform, the rest sampled proportional to the
    squared distance to the nearest already-chosen centroid."""
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n_points, got k={k}, n={n}")
    centroids = np.empty((k, points.shape[1]), dtype=points.dtype)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining mass is on already-covered points
            idx = int(rng.integers(n))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid labels, squared Euclidean, ties to the lowest index."""
    return assign_nearest(np.ascontiguousarray(points),
                          np.ascontiguousarray(centroids))


def weighted_update(points: np.ndarray, labels: np.ndarray,
                    old_centroids: np.ndarray, epsilon: float) -> np.ndarray:
    """Distance-weighted means, weight 1/(distance-to-old-centroid + eps);
    clusters with no member keep their previous centroid."""
    return weighted_centroid_update(
        np.ascontiguousarray(points), np.ascontiguousarray(labels, dtype=np.int64),
        np.ascontiguousarray(old_centroids), epsilon,
    )


def kmeans_objective(points: np.ndarray, labels: np.ndarray,
                     centroids: np.ndarray) -> float:
    return float(((points - centroids[labels]) ** 2).sum())


def cluster(batches: list[UploadBatch], k: int, max_iters: int = 50,
            shift_tol: float = 1e-4, epsilon: float = 1e-8,
            rng: np.random.Generator | None = None) -> ClusterModel:
    """Pool every client's encodings and fit weighted k-means.

    Alternates nearest-centroid assignment with distance-weighted updates
    until the largest centroid shift drops below shift_tol or max_iters
    passes; assignments are recomputed against the final centroids.
    """
    if not batches:
        raise ValueError("no upload batches")
    rng = rng or np.random.default_rng(0)
    spans: dict[str, tuple[int, int]] = {}
    start = 0
    blocks = []
    for b in batches:
        if b.client_id in spans:
            raise ValueError(f"duplicate upload from client {b.client_id!r}")
        spans[b.client_id] = (start, b.encodings.shape[0])
        blocks.append(np.asarray(b.encodings, dtype=np.float64))
        start += b.encodings.shape[0]
    points = np.vstack(blocks)
    if points.shape[0] < k:
        raise ValueError(f"{points.shape[0]} points cannot seed {k} clusters")

    centroids = kmeanspp_init(points, k, rng)
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        labels = assign(points, centroids)
        new_centroids = weighted_update(points, labels, centroids, epsilon)
        shift = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        if shift < shift_tol:
            break
    labels = assign(points, centroids)

    return ClusterModel(
        centroids=centroids,
        assignments=labels,
        epsilon=epsilon,
        max_iters=max_iters,
        shift_tol=shift_tol,
        iterations_run=iterations,
        client_spans=spans,
    )


def synchronize(model: ClusterModel, batch: UploadBatch) -> np.ndarray:
    """Per-item centroid vectors for one client, float32 like the wire format."""
    if batch.client_id not in model.client_spans:
        raise ValueError(f"unknown client {batch.client_id!r}")
    start, count = model.client_spans[batch.client_id]
    if count != batch.encodings.shape[0]:
        raise ValueError(
            f"batch has {batch.encodings.shape[0]} items, model expected {count}"
        )
    rows = model.assignments[start : start + count]
    return model.centroids[rows].astype(np.float32)
