import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..config.model_config import PalmConfig
from ..errors import DegenerateDataError, DimensionError
from ..gp.core import default_theta_start, gp_predict_many, lengthscale_cap
from ..gp.kernel import InputCoding, Nugget
from ..lagp.local_expert import LocalExpert, build_local_expert
from ..scheduler.worker_pool import WorkerPool, serial_pool
from ..testbed.data import TrainingSet
from .aggregation import (
    calibrate_tau2,
    combine_predictions,
    default_power,
    empirical_s2,
    pooled_nugget,
    rho_matrix,
    weights,
)

logger = logging.getLogger(__name__)

SPACEFILL = "spacefill"
SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class PalmPrediction:
    mean: float
    variance: float
    weights: np.ndarray


@dataclass(frozen=True)
class PalmPredictionBatch:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.means.shape[0]

    def __getitem__(self, i: int) -> PalmPrediction:
        return PalmPrediction(float(self.means[i]), float(self.variances[i]), self.weights[i])


@dataclass(frozen=True)
class PalmModel:
    """K calibrated local experts and everything needed to aggregate them"""

    experts: Tuple[LocalExpert, ...]
    rho: np.ndarray
    tau2: float
    nugget: Nugget
    power_p: float
    s2: float
    coding: InputCoding
    theta_cap: np.ndarray
    theta_start: float
    center_modes: Tuple[str, ...]

    @property
    def K(self) -> int:
        return len(self.experts)

    @property
    def dim(self) -> int:
        return self.coding.dim

    @property
    def centers(self) -> np.ndarray:
        """Expert centers in coded units"""
        return np.vstack([e.center for e in self.experts])

    def union_design_indices(self) -> np.ndarray:
        return np.unique(np.concatenate([e.design_indices for e in self.experts]))

    def predict(self, X: np.ndarray, pool: Optional[WorkerPool] = None) -> PalmPredictionBatch:
        return palm_predict_many(self, X, pool=pool)


def expert_moments(
    experts: Sequence[LocalExpert], U: np.ndarray, pool: Optional[WorkerPool] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """M x K predictive means and variances at coded inputs"""
    pool = pool or serial_pool()
    moments = pool.map(lambda e: gp_predict_many(e.fit, U), experts)
    means = np.column_stack([m for m, _ in moments])
    variances = np.column_stack([v for _, v in moments])
    return means, variances


def palm_predict_many(m: PalmModel, X: np.ndarray, pool: Optional[WorkerPool] = None) -> PalmPredictionBatch:
    """Aggregate predictions at natural-unit inputs (one row per query)"""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, m.dim)
    if X.shape[0] == 0:
        return PalmPredictionBatch(np.empty(0), np.empty(0), np.empty((0, m.K)))
    U = m.coding.encode(X)
    means, variances = expert_moments(m.experts, U, pool)
    # an expert can report zero variance at its own design under tiny nuggets
    w = weights(np.maximum(variances, np.finfo(float).tiny), m.power_p)
    mean, variance = combine_predictions(means, variances, w, m.rho)
    return PalmPredictionBatch(means=mean, variances=variance, weights=w)


def palm_predict(m: PalmModel, x: np.ndarray) -> PalmPrediction:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (m.dim,):
        raise DimensionError(f"Query has shape {x.shape}, model expects ({m.dim},)")
    return palm_predict_many(m, x[None, :])[0]


def assemble_palm(
    data: TrainingSet,
    experts: Sequence[LocalExpert],
    cfg: PalmConfig,
    theta_cap: np.ndarray,
    theta_start: float,
    center_modes: Sequence[str],
    pool: Optional[WorkerPool] = None,
    previous_rho: Optional[np.ndarray] = None,
) -> PalmModel:
    """Correlations, amplitude calibration and nugget pooling over built experts.

    Every expert is refactorized once under the shared amplitude and nugget.
    """
    pool = pool or serial_pool()
    experts = list(experts)
    K = len(experts)
    rho = rho_matrix(experts, pool, previous=previous_rho if cfg.incremental_rho else None)
    s2 = empirical_s2(data.y)
    tau2 = calibrate_tau2(s2, rho)
    nugget = pooled_nugget(experts, tau2, cfg.mse_normalization)
    calibrated = pool.map(lambda e: e.recalibrated(tau2, nugget.eta), experts)
    power_p = cfg.power if cfg.power is not None else default_power(data.dim, K)
    logger.info(
        f"PALM with K={K}: s2={s2:.4g} tau2={tau2:.4g} eta={nugget.eta:.3g}"
        f"{' (jitter)' if nugget.is_jitter else ''} p={power_p:.3f}"
    )
    return PalmModel(
        experts=tuple(calibrated),
        rho=rho,
        tau2=tau2,
        nugget=nugget,
        power_p=power_p,
        s2=s2,
        coding=data.coding,
        theta_cap=np.asarray(theta_cap, dtype=float),
        theta_start=float(theta_start),
        center_modes=tuple(center_modes),
    )


def fit_palm(
    data: TrainingSet,
    centers: np.ndarray,
    cfg: PalmConfig,
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
) -> PalmModel:
    """Build one expert per coded center and aggregate them"""
    pool = pool or serial_pool()
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != data.dim:
        raise DimensionError(f"Centers have dimension {centers.shape[1]}, data has {data.dim}")
    if centers.shape[0] < 1:
        raise ValueError("fit_palm needs at least one center")
    if data.size < cfg.n:
        raise DegenerateDataError(f"PALM with n={cfg.n} needs at least {cfg.n} training points, got {data.size}")

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
    experts = pool.map(lambda c: build_local_expert(data, c, cfg, theta_cap, theta_start), list(centers))
    return assemble_palm(
        data, experts, cfg, theta_cap, theta_start, [SPACEFILL] * len(experts), pool=pool
    )


def grow_palm(
    m: PalmModel,
    data: TrainingSet,
    center: np.ndarray,
    cfg: PalmConfig,
    mode: str = SEQUENTIAL,
    pool: Optional[WorkerPool] = None,
) -> PalmModel:
    """Append one expert at a coded center and recalibrate the whole model"""
    expert = build_local_expert(data, center, cfg, m.theta_cap, m.theta_start)
    return assemble_palm(
        data,
        list(m.experts) + [expert],
        cfg,
        m.theta_cap,
        m.theta_start,
        list(m.center_modes) + [mode],
        pool=pool,
        previous_rho=m.rho,
    )
