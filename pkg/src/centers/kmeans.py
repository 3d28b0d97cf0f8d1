import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    # within-cluster sum of squares after each Lloyd iteration
    inertia: np.ndarray
    iterations: int

    def clusters(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.labels == j) for j in range(self.centroids.shape[0])]


def _plus_plus_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new seed drawn proportionally to squared distance"""
    M = points.shape[0]
    chosen = [int(rng.integers(M))]
    d2 = cdist(points, points[chosen], "sqeuclidean")[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(M), chosen)
            nxt = int(rng.choice(remaining))
        else:
            nxt = int(rng.choice(M, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, cdist(points, points[[nxt]], "sqeuclidean")[:, 0])
    return points[chosen].copy()


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 100, n_init: int = 1) -> KMeansResult:
    """Lloyd iterations from k-means++ seeds until the assignment stops changing.

    An empty cluster is re-seeded with the point farthest from its own centroid.
    With ``n_init`` > 1 the lowest-inertia of that many seeded runs is kept.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    M = points.shape[0]
    if k < 1 or k > M:
        raise ValueError(f"k must be between 1 and the number of points ({M}), got {k}")
    if n_init < 1:
        raise ValueError(f"n_init must be at least 1, got {n_init}")
    if n_init == 1:
        return _lloyd(points, k, np.random.default_rng(seed), max_iter)

    runs = [_lloyd(points, k, np.random.default_rng(int(s)), max_iter)
            for s in np.random.SeedSequence(seed).generate_state(n_init)]
    return min(runs, key=lambda r: r.inertia[-1])


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> KMeansResult:
    M = points.shape[0]
    centroids = _plus_plus_seeds(points, k, rng)
    labels = np.full(M, -1)
    inertia = []

    for it in range(1, max_iter + 1):
        d2 = cdist(points, centroids, "sqeuclidean")
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                own = d2[np.arange(M), new_labels]
                # never steal the sole member of another cluster
                counts = np.bincount(new_labels, minlength=k)
                own[counts[new_labels] <= 1] = -np.inf
                far = int(np.argmax(own))
                new_labels[far] = j
                centroids[j] = points[far]
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = np.vstack([points[labels == j].mean(axis=0) for j in range(k)])
        inertia.append(float(np.sum((points - centroids[labels]) ** 2)))
    else:
        logger.warning(f"k-means stopped after {max_iter} iterations without a fixed point")

    return KMeansResult(labels=labels, centroids=centroids, inertia=np.asarray(inertia), iterations=it)
