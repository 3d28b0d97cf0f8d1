"""Global+PALM: a subset GP for the large-scale trend, PALM on its residuals."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..config.model_config import PalmConfig
from ..gp.core import GpFit, fit_separable_gp, gp_predict_many
from ..scheduler.worker_pool import WorkerPool, serial_pool
from ..testbed.data import TrainingSet
from .model import PalmModel, PalmPredictionBatch, fit_palm, palm_predict_many

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalPlusPalmModel:
    global_fit: GpFit
    global_indices: np.ndarray
    palm: PalmModel
    additive_variance: bool = False

    @property
    def dim(self) -> int:
        return self.palm.dim

    @property
    def coding(self):
        return self.palm.coding

    def predict(self, X: np.ndarray, pool: Optional[WorkerPool] = None) -> PalmPredictionBatch:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim)
        resid = palm_predict_many(self.palm, X, pool=pool)
        if X.shape[0] == 0:
            return resid
        g_mean, g_var = gp_predict_many(self.global_fit, self.coding.encode(X))
        variances = resid.variances + g_var if self.additive_variance else resid.variances
        return PalmPredictionBatch(means=g_mean + resid.means, variances=variances, weights=resid.weights)


def fit_global_stage(data: TrainingSet, m_global: int, cfg: PalmConfig, seed: int = 0):
    """Separable GP on a uniform random sub-sample of the training data"""
    m = min(m_global, data.size)
    if m < m_global:
        logger.warning(f"Global sub-sample of {m_global} exceeds N={data.size}; using all points")
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(data.size, size=m, replace=False))
    fit = fit_separable_gp(data.coded_X[indices], data.y[indices], nugget_mode=cfg.nugget_mode)
    logger.info(f"Global stage on {m} points: theta={np.round(fit.theta, 5)} eta={fit.eta:.3g}")
    return fit, indices


def fit_global_plus_palm(
    data: TrainingSet,
    centers: np.ndarray,
    cfg: PalmConfig,
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
) -> GlobalPlusPalmModel:
    """Two-stage fit: global subset GP, then PALM on y - mu_global(x)"""
    pool = pool or serial_pool()
    global_seed, palm_seed = np.random.SeedSequence(seed).generate_state(2)
    global_fit, indices = fit_global_stage(data, cfg.m_global, cfg, seed=int(global_seed))
    trend, _ = gp_predict_many(global_fit, data.coded_X)
    palm = fit_palm(data.with_responses(data.y - trend), centers, cfg, seed=int(palm_seed), pool=pool)
    return GlobalPlusPalmModel(
        global_fit=global_fit,
        global_indices=indices,
        palm=palm,
        additive_variance=cfg.additive_variance,
    )
