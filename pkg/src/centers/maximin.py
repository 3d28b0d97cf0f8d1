"""Maximin space-filling center designs on the unit cube."""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

logger = logging.getLogger(__name__)


@dataclass
class CenterSet:
    """Coded center locations with how each one was chosen"""

    C: np.ndarray
    history: List[Tuple[np.ndarray, str]] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.C.shape[0]

    @classmethod
    def spacefill(cls, C: np.ndarray) -> "CenterSet":
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return cls(C=C, history=[(c.copy(), "spacefill") for c in C])

    def add(self, center: np.ndarray, mode: str) -> None:
        center = np.asarray(center, dtype=float)
        if np.any(np.all(np.isclose(self.C, center, rtol=0.0, atol=1e-12), axis=1)):
            raise ValueError(f"Center {center} duplicates an existing center")
        self.C = np.vstack([self.C, center])
        self.history.append((center.copy(), mode))


def boundary_distance(C: np.ndarray) -> np.ndarray:
    """Distance from each row to the nearest face of the unit cube"""
    return np.minimum(C, 1.0 - C).min(axis=1)


def maximin_objective(C: np.ndarray, buffer: bool) -> float:
    """Smallest pairwise distance, also against twice the boundary distance when buffered"""
    C = np.atleast_2d(C)
    candidates = []
    if C.shape[0] > 1:
        candidates.append(pdist(C).min())
    if buffer:
        candidates.append(2.0 * boundary_distance(C).min())
    return float(min(candidates)) if candidates else np.inf


def maximin_centers(
    K: int,
    d: int,
    buffer: bool = True,
    seed: int = 0,
    iterations: int = 5000,
) -> CenterSet:
    """Stochastic exchange search for a maximin design of K points in [0,1]^d.

    Each step moves one point, usually one that attains the current minimum,
    by a shrinking Gaussian step (clipped to the cube) or a fresh uniform draw,
    and keeps the move when the objective does not decrease.
    """
    if K < 1:
        raise ValueError(f"Need at least one center, got K={K}")
    rng = np.random.default_rng(seed)
    C = rng.random((K, d))
    D = squareform(pdist(C)) if K > 1 else np.zeros((1, 1))
    np.fill_diagonal(D, np.inf)
    current = maximin_objective(C, buffer)

    for t in range(iterations):
        scale = 0.25 * (1.0 - t / iterations) + 1e-3
        if K > 1 and rng.random() < 0.7:
            # a point involved in the closest pair
            critical = np.flatnonzero(D.min(axis=1) <= np.min(D) + 1e-15)
            i = int(rng.choice(critical))
        else:
            i = int(rng.integers(K))
        if rng.random() < 0.1:
            proposal = rng.random(d)
        else:
            proposal = np.clip(C[i] + rng.normal(0.0, scale, size=d), 0.0, 1.0)

        row = cdist(proposal[None, :], C)[0]
        row[i] = np.inf
        others = np.delete(np.delete(D, i, axis=0), i, axis=1)
        pair_min = min(row.min(), others.min()) if K > 1 else np.inf
        boundary = 2.0 * min(np.minimum(proposal, 1.0 - proposal).min(),
                             boundary_distance(np.delete(C, i, axis=0)).min() if K > 1 else np.inf)
        value = min(pair_min, boundary) if buffer else pair_min
        if value >= current:
            C[i] = proposal
            D[i, :] = row
            D[:, i] = row
            current = value

    logger.debug(f"Maximin design K={K} d={d} buffer={buffer}: objective {current:.5f}")
    return CenterSet.spacefill(C)
