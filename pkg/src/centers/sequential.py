"""Greedy sequential placement of new PALM centers.

Residuals of the current model are clustered together with the inputs; the
cluster with the largest mean absolute residual defines a bounding box, and the
new center is the maximin point of that box against the existing centers and
the box corners.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ..config.model_config import PalmConfig
from ..errors import DegenerateDataError
from ..palm.model import SEQUENTIAL, PalmModel, fit_palm, grow_palm
from ..scheduler.worker_pool import WorkerPool, serial_pool
from ..testbed.data import TrainingSet
from .kmeans import KMeansResult, kmeans
from .maximin import CenterSet, maximin_centers

logger = logging.getLogger(__name__)

MAX_CORNERS = 1024
KMEANS_RESTARTS = 10


@dataclass(frozen=True)
class ResidualCluster:
    member_indices: np.ndarray
    mean_abs_residual: float
    bounding_box: np.ndarray  # d x 2, coded (lo, hi)


@dataclass(frozen=True)
class CenterProposal:
    """Everything the selection step computed, for inspection and testing"""

    center: np.ndarray
    objective: float
    residuals: np.ndarray
    point_indices: np.ndarray
    clustering: KMeansResult
    cluster: ResidualCluster
    search_box: np.ndarray
    starts: np.ndarray
    start_values: np.ndarray
    solutions: np.ndarray
    solution_values: np.ndarray


@dataclass(frozen=True)
class BoxSearch:
    """Multi-start maximin search inside one box"""

    center: np.ndarray
    objective: float
    starts: np.ndarray
    start_values: np.ndarray
    solutions: np.ndarray
    solution_values: np.ndarray


def scale_residuals(r: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Scale absolute residuals so their spread matches the coded inputs.

    The residual column gets the average per-dimension standard deviation of
    ``U``; a constant residual vector maps to zeros.
    """
    sd = r.std()
    if sd <= 0:
        return np.zeros_like(r)
    return (r - r.mean()) * (U.std(axis=0).mean() / sd)


def worst_cluster(U: np.ndarray, r: np.ndarray, k: int, seed: int = 0) -> Tuple[KMeansResult, np.ndarray, float]:
    """k-means on inputs bound to scaled residuals; the cluster with the largest mean |r|.

    The clustering is the lowest-inertia of several seeded runs.

    Returns the clustering, the member positions in ``U`` and their mean residual.
    """
    points = np.column_stack([U, scale_residuals(r, U)])
    clustering = kmeans(points, k=min(k, len(r)), seed=seed, n_init=KMEANS_RESTARTS)
    members = clustering.clusters()
    mean_r = np.array([r[idx].mean() if len(idx) else -np.inf for idx in members])
    best = int(np.argmax(mean_r))
    return clustering, members[best], float(mean_r[best])


def box_corners(box: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    d = box.shape[0]
    if d <= 10:
        return np.array(list(itertools.product(*box)), dtype=float)
    bits = rng.integers(0, 2, size=(MAX_CORNERS, d))
    return np.where(bits == 1, box[:, 1], box[:, 0])


def grid_spacing(U: np.ndarray) -> np.ndarray:
    """Smallest positive gap between distinct coded values in each dimension"""
    spacing = np.empty(U.shape[1])
    for j in range(U.shape[1]):
        gaps = np.diff(np.unique(U[:, j]))
        gaps = gaps[gaps > 0]
        spacing[j] = gaps.min() if gaps.size else 1.0 / np.sqrt(U.shape[0])
    return spacing


def _distance_to_set(Z: np.ndarray) -> Callable[[np.ndarray], float]:
    def f(c: np.ndarray) -> float:
        return float(cdist(c[None, :], Z).min())
    return f


def maximin_in_box(
    box: np.ndarray,
    centers: np.ndarray,
    M_s: int,
    seed: int = 0,
    budget: int = 200,
    pool: Optional[WorkerPool] = None,
) -> BoxSearch:
    """Point of ``box`` farthest from the existing centers and the box corners.

    Bounded Nelder-Mead from ``M_s`` uniform starts; a search that ends below
    its start keeps the start.
    """
    if M_s < 1:
        raise ValueError(f"M_s must be at least 1, got {M_s}")
    pool = pool or serial_pool()
    corner_seed, start_seed = np.random.SeedSequence(seed).generate_state(2)
    corners = box_corners(box, np.random.default_rng(int(corner_seed)))
    f = _distance_to_set(np.vstack([centers, corners]) if len(centers) else corners)

    # keep the search strictly inside the box
    margin = 1e-9 * (box[:, 1] - box[:, 0])
    inner = np.column_stack([box[:, 0] + margin, box[:, 1] - margin])
    starts = np.random.default_rng(int(start_seed)).uniform(inner[:, 0], inner[:, 1], size=(M_s, box.shape[0]))

    def optimize(start: np.ndarray) -> np.ndarray:
        res = minimize(
            lambda c: -f(np.clip(c, inner[:, 0], inner[:, 1])),
            start,
            method="Nelder-Mead",
            bounds=list(map(tuple, inner)),
            options={"maxfev": budget, "xatol": 1e-8, "fatol": 1e-10},
        )
        found = np.clip(res.x, inner[:, 0], inner[:, 1])
        return found if f(found) >= f(start) else start.copy()

    solutions = np.vstack(pool.map(optimize, list(starts)))
    start_values = np.array([f(s) for s in starts])
    solution_values = np.array([f(s) for s in solutions])
    winner = int(np.argmax(solution_values))
    return BoxSearch(
        center=solutions[winner],
        objective=float(solution_values[winner]),
        starts=starts,
        start_values=start_values,
        solutions=solutions,
        solution_values=solution_values,
    )


def select_next_center(
    m: PalmModel,
    data: TrainingSet,
    M_s: Optional[int] = None,
    seed: int = 0,
    cfg: Optional[PalmConfig] = None,
    pool: Optional[WorkerPool] = None,
) -> CenterProposal:
    """One greedy center: residual clustering, bounding box, multi-start maximin"""
    cfg = cfg or PalmConfig()
    pool = pool or serial_pool()
    M_s = M_s if M_s is not None else cfg.multistarts
    if M_s < 1:
        raise ValueError(f"M_s must be at least 1, got {M_s}")
    sub_seed, km_seed, search_seed = np.random.SeedSequence(seed).generate_state(3)

    # residuals at the known inputs
    point_indices = np.arange(data.size)
    if cfg.residual_subsample is not None and data.size > cfg.residual_subsample:
        rng = np.random.default_rng(int(sub_seed))
        point_indices = np.sort(rng.choice(data.size, size=cfg.residual_subsample, replace=False))
    U = data.coded_X[point_indices]
    chunks = np.array_split(point_indices, max(1, min(pool.threads, len(point_indices))))
    fitted = np.concatenate(pool.map(lambda idx: m.predict(data.X[idx]).means, chunks))
    r = np.abs(data.y[point_indices] - fitted)

    clustering, members, mean_r = worst_cluster(U, r, m.K, seed=int(km_seed))
    member_U = U[members]
    box = np.column_stack([member_U.min(axis=0), member_U.max(axis=0)])
    cluster = ResidualCluster(
        member_indices=point_indices[members],
        mean_abs_residual=mean_r,
        bounding_box=box.copy(),
    )

    search_box = box.copy()
    flat = search_box[:, 1] - search_box[:, 0] <= 0
    if np.any(flat):
        spacing = grid_spacing(data.coded_X)
        search_box[flat, 0] -= spacing[flat]
        search_box[flat, 1] += spacing[flat]
        search_box = np.clip(search_box, 0.0, 1.0)
        logger.warning(f"Degenerate residual box in dimensions {np.flatnonzero(flat)}; inflated by one grid spacing")

    search = maximin_in_box(search_box, m.centers, M_s, seed=int(search_seed), budget=cfg.optimizer_budget, pool=pool)
    if search.objective <= 0:
        raise DegenerateDataError("Every candidate center coincides with an existing center")

    logger.info(
        f"New center {np.round(search.center, 4)} in a cluster of {len(cluster.member_indices)} points "
        f"(mean |r|={cluster.mean_abs_residual:.4g}, maximin={search.objective:.4g})"
    )
    return CenterProposal(
        center=search.center,
        objective=search.objective,
        residuals=r,
        point_indices=point_indices,
        clustering=clustering,
        cluster=cluster,
        search_box=search_box,
        starts=search.starts,
        start_values=search.start_values,
        solutions=search.solutions,
        solution_values=search.solution_values,
    )


def sequential_palm(
    data: TrainingSet,
    K_init: int,
    K_final: int,
    cfg: PalmConfig,
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
    on_step: Optional[Callable[[PalmModel], None]] = None,
) -> PalmModel:
    """Space-filling seed model, then greedy additions up to K_final centers.

    ``on_step`` sees the seed model and every grown model, in order.
    """
    if not 1 <= K_init <= K_final:
        raise ValueError(f"Need 1 <= K_init <= K_final, got K_init={K_init}, K_final={K_final}")
    pool = pool or serial_pool()
    design_seed, fit_seed, *step_seeds = np.random.SeedSequence(seed).spawn(2 + K_final - K_init)
    centers: CenterSet = maximin_centers(K_init, data.dim, buffer=True, seed=int(design_seed.generate_state(1)[0]))
    model = fit_palm(data, centers.C, cfg, seed=int(fit_seed.generate_state(1)[0]), pool=pool)
    if on_step:
        on_step(model)

    for step_seed in step_seeds:
        proposal = select_next_center(model, data, seed=int(step_seed.generate_state(1)[0]), cfg=cfg, pool=pool)
        centers.add(proposal.center, SEQUENTIAL)
        model = grow_palm(model, data, proposal.center, cfg, mode=SEQUENTIAL, pool=pool)
        logger.info(f"Added center {model.K}/{K_final}")
        if on_step:
            on_step(model)
    return model
