"""Comparator predictors for the benchmarks.

All baselines take natural-unit test inputs and return a ``BaselinePrediction``
with one mean and variance per test row.
"""

import logging
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from ..config.model_config import PalmConfig
from ..errors import DegenerateDataError
from ..gp.core import GpFit, default_theta_start, fit_separable_gp, gp_predict_many, lengthscale_cap
from ..lagp.local_expert import build_local_expert, expert_predict
from ..palm.aggregation import combine_predictions, indicator_weights, weights
from ..scheduler.worker_pool import WorkerPool, serial_pool
from .data import TrainingSet

logger = logging.getLogger(__name__)

PARTITION_CELL_CAP = 400


class BaselinePrediction(NamedTuple):
    means: np.ndarray
    variances: np.ndarray


def _test_inputs(data: TrainingSet, X_test: np.ndarray) -> np.ndarray:
    return data.coding.encode(np.asarray(X_test, dtype=float).reshape(-1, data.dim))


def baseline_transductive_lagp(
    data: TrainingSet,
    X_test: np.ndarray,
    cfg: PalmConfig,
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
) -> BaselinePrediction:
    """An independent local GP built at, and used only for, every test point"""
    pool = pool or serial_pool()
    U = _test_inputs(data, X_test)
    if U.shape[0] == 0:
        return BaselinePrediction(np.empty(0), np.empty(0))
    cap_seed, start_seed = np.random.SeedSequence(seed).generate_state(2)
    theta_cap = lengthscale_cap(
        data.coded_X,
        data.y,
        num_subsets=cfg.cap_subsets,
        subset_size=cfg.cap_subset_size,
        seed=int(cap_seed),
        nugget_mode=cfg.nugget_mode,
    )
    theta_start = default_theta_start(data.coded_X, seed=int(start_seed))

    def predict_at(u: np.ndarray):
        expert = build_local_expert(data, u, cfg, theta_cap, theta_start)
        return expert_predict(expert, u)

    moments = pool.map(predict_at, list(U))
    logger.info(f"Transductive local GP at {U.shape[0]} test points")
    return BaselinePrediction(
        means=np.array([p.mean for p in moments]),
        variances=np.array([p.variance for p in moments]),
    )


def partition_cells(U: np.ndarray, per_dim: int) -> np.ndarray:
    """Flat index of the regular cell holding each coded input (first dimension slowest)"""
    idx = np.clip(np.floor(U * per_dim).astype(int), 0, per_dim - 1)
    return np.ravel_multi_index(tuple(idx.T), (per_dim,) * U.shape[1])


def fit_partition(
    data: TrainingSet,
    grid_K: int,
    nugget_mode: str = "jitter",
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
) -> List[GpFit]:
    """One GP per cell of a regular grid_K-cell partition of the coded domain.

    ``grid_K`` must be a perfect d-th power. Cells holding more than
    PARTITION_CELL_CAP points are sub-sampled.
    """
    pool = pool or serial_pool()
    per_dim = _cells_per_dim(grid_K, data.dim)
    rng = np.random.default_rng(seed)
    cells = partition_cells(data.coded_X, per_dim)
    members = []
    for k in range(grid_K):
        idx = np.flatnonzero(cells == k)
        if idx.size < 2:
            raise DegenerateDataError(f"Partition cell {k} holds {idx.size} training points")
        if idx.size > PARTITION_CELL_CAP:
            idx = np.sort(rng.choice(idx, size=PARTITION_CELL_CAP, replace=False))
        members.append(idx)
    return pool.map(lambda idx: fit_separable_gp(data.coded_X[idx], data.y[idx], nugget_mode), members)


def predict_partition(
    fits: Sequence[GpFit], data: TrainingSet, X_test: np.ndarray, pool: Optional[WorkerPool] = None
) -> BaselinePrediction:
    """Each test point takes the prediction of the cell it falls in"""
    U = _test_inputs(data, X_test)
    if U.shape[0] == 0:
        return BaselinePrediction(np.empty(0), np.empty(0))
    K = len(fits)
    means, variances = _moments(fits, U, pool or serial_pool())
    w = indicator_weights(partition_cells(U, _cells_per_dim(K, data.dim)), K)
    return BaselinePrediction(*combine_predictions(means, variances, w, np.eye(K)))


def baseline_partition_gp(
    data: TrainingSet,
    grid_K: int,
    X_test: np.ndarray,
    nugget_mode: str = "jitter",
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
) -> BaselinePrediction:
    fits = fit_partition(data, grid_K, nugget_mode=nugget_mode, seed=seed, pool=pool)
    return predict_partition(fits, data, X_test, pool=pool)


def fit_model_average(
    data: TrainingSet,
    K: int,
    subset_size: int,
    seed: int = 0,
    nugget_mode: str = "jitter",
    pool: Optional[WorkerPool] = None,
) -> List[GpFit]:
    """GPs on K disjoint random subsets of the training data"""
    pool = pool or serial_pool()
    if K < 1 or subset_size < 2:
        raise ValueError(f"Need K >= 1 and subset_size >= 2, got K={K}, subset_size={subset_size}")
    if K * subset_size > data.size:
        raise ValueError(f"{K} disjoint subsets of {subset_size} need {K * subset_size} points, have {data.size}")
    order = np.random.default_rng(seed).permutation(data.size)
    members = [np.sort(order[k * subset_size:(k + 1) * subset_size]) for k in range(K)]
    return pool.map(lambda idx: fit_separable_gp(data.coded_X[idx], data.y[idx], nugget_mode), members)


def predict_model_average(
    fits: Sequence[GpFit], data: TrainingSet, X_test: np.ndarray, pool: Optional[WorkerPool] = None
) -> BaselinePrediction:
    """Plain precision weights (power 1) and no inter-model correlation"""
    U = _test_inputs(data, X_test)
    if U.shape[0] == 0:
        return BaselinePrediction(np.empty(0), np.empty(0))
    means, variances = _moments(fits, U, pool or serial_pool())
    w = weights(np.maximum(variances, np.finfo(float).tiny), 1.0)
    return BaselinePrediction(*combine_predictions(means, variances, w, np.eye(len(fits))))


def baseline_model_average(
    data: TrainingSet,
    K: int,
    subset_size: int,
    X_test: np.ndarray,
    seed: int = 0,
    nugget_mode: str = "jitter",
    pool: Optional[WorkerPool] = None,
) -> BaselinePrediction:
    fits = fit_model_average(data, K, subset_size, seed=seed, nugget_mode=nugget_mode, pool=pool)
    return predict_model_average(fits, data, X_test, pool=pool)


def _cells_per_dim(grid_K: int, d: int) -> int:
    per_dim = int(round(grid_K ** (1.0 / d)))
    if grid_K < 1 or per_dim**d != grid_K:
        raise ValueError(f"grid_K={grid_K} is not a perfect power of d={d}")
    return per_dim


def _moments(fits: Sequence[GpFit], U: np.ndarray, pool: WorkerPool):
    moments = pool.map(lambda f: gp_predict_many(f, U), fits)
    return np.column_stack([m for m, _ in moments]), np.column_stack([v for _, v in moments])
