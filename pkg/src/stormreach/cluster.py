"""K-means clustering of storm cells with elbow-based cluster-count selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: np.ndarray  # (n,), values in 0..k-1
    centroids: np.ndarray  # (k, d)
    sse: float


def _sq_dists(features: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = features[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plusplus_init(features: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = features.shape[0]
    centroids = np.empty((k, features.shape[1]))
    centroids[0] = features[rng.integers(n)]
    d2 = np.sum((features - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[i:] = features[rng.integers(n, size=k - i)]
            break
        centroids[i] = features[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((features - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(features: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int) -> ClusterAssignment:
    centroids = _plusplus_init(features, k, rng)
    labels = np.full(features.shape[0], -1)
    prev_sse = np.inf
    for _ in range(max_iter):
        d2 = _sq_dists(features, centroids)
        new_labels = np.argmin(d2, axis=1)
        sse = float(d2[np.arange(features.shape[0]), new_labels].sum())
        assert sse <= prev_sse + 1e-9 * max(1.0, prev_sse if np.isfinite(prev_sse) else 1.0), \
            "k-means SSE increased across an iteration"
        prev_sse = sse
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = features[labels == j]
            if members.shape[0] == 0:
                # Re-seed an emptied cluster at the point farthest from its centroid.
                far = np.argmax(np.min(_sq_dists(features, centroids), axis=1))
                centroids[j] = features[far]
            else:
                centroids[j] = members.mean(axis=0)
    d2 = _sq_dists(features, centroids)
    labels = np.argmin(d2, axis=1)
    sse = float(d2[np.arange(features.shape[0]), labels].sum())
    return ClusterAssignment(k=k, labels=labels, centroids=centroids, sse=sse)


def kmeans(features, k: int, rng: np.random.Generator, n_restarts: int = 10,
           max_iter: int = 100) -> ClusterAssignment:
    """Lloyd's algorithm, best of `n_restarts` seeded k-means++ starts."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n = features.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty feature set")
    if k < 1 or k > n:
        raise ValueError(f"cluster count {k} outside 1..{n}")
    best = None
    for _ in range(n_restarts):
        result = _lloyd(features, k, rng, max_iter)
        if best is None or result.sse < best.sse:
            best = result
    return best


def select_k(features, k_max: int, rng: np.random.Generator, rho: float = 0.15) -> int:
    """Elbow rule: smallest K whose relative SSE drop to K+1 falls below rho."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n = features.shape[0]
    if n == 1:
        return 1
    cap = min(k_max, n)
    sse = [kmeans(features, k, rng).sse for k in range(1, cap + 1)]
    for i in range(cap - 1):
        if sse[i] == 0.0:
            return i + 1
        if (sse[i] - sse[i + 1]) / sse[i] < rho:
            return i + 1
    return cap
