"""Precision-weighted aggregation of local experts.

Weights are normalized powered precisions, inter-expert correlation is a single
stationary value per pair, and the shared amplitude is pinned so that the
ensemble's far-field variance matches the empirical response variance.
"""

import logging
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from ..gp.core import predictive_kernel_many
from ..gp.kernel import Nugget, _as_point
from ..lagp.local_expert import LocalExpert
from ..scheduler.worker_pool import WorkerPool, serial_pool

logger = logging.getLogger(__name__)

S2_FLOOR = 1e-12


def weights(sigma2s: np.ndarray, p: float) -> np.ndarray:
    """w_k = phi_k^p / sum_l phi_l^p with phi_k = 1 / sigma2_k.

    Works on a K-vector or row-wise on an M x K matrix. Evaluated in log space
    with the row maximum subtracted; rows of identical variances get exactly 1/K.
    """
    s = np.asarray(sigma2s, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("Precision weights need strictly positive variances")
    logits = -p * np.log(s)
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w = w / w.sum(axis=-1, keepdims=True)
    equal = np.all(s == s[..., :1], axis=-1)
    if np.any(equal):
        w[equal] = 1.0 / s.shape[-1]
    return w


def indicator_weights(assignment: np.ndarray, K: int) -> np.ndarray:
    """One-hot weights: each row trusts exactly one expert"""
    assignment = np.asarray(assignment, dtype=int)
    w = np.zeros((assignment.shape[0], K))
    w[np.arange(assignment.shape[0]), assignment] = 1.0
    return w


def default_power(d: int, K: int) -> float:
    """log_d K, with base 2 standing in when d = 1"""
    if K < 1 or d < 1:
        raise ValueError(f"default_power needs d >= 1 and K >= 1, got d={d}, K={K}")
    if K == 1:
        return 0.0
    if d == 1:
        return float(np.log2(K))
    return float(np.log(K) / np.log(d))


def combine_predictions(
    means: np.ndarray, variances: np.ndarray, w: np.ndarray, rho: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted mean and (w * sigma)^T rho (w * sigma), row-wise over M x K inputs"""
    mean = np.sum(w * means, axis=-1)
    ws = w * np.sqrt(variances)
    variance = np.einsum("mk,kj,mj->m", np.atleast_2d(ws), rho, np.atleast_2d(ws))
    return mean, np.maximum(variance.reshape(mean.shape), 0.0)


def predictive_kernel(e: LocalExpert, x: np.ndarray) -> float:
    """k(x)^T K^{-1} k(x) for one expert"""
    x = _as_point(x, e.fit.dim)
    return float(predictive_kernel_many(e.fit, x[None, :])[0])


def estimate_rho(ek: LocalExpert, ej: LocalExpert) -> float:
    """Largest predictive kernel of either expert over the other's design.

    Uses each expert's provisional fit, so the estimate does not depend on
    whether the experts were recalibrated in between.
    """
    fk, fj = ek.provisional_fit, ej.provisional_fit
    forward = predictive_kernel_many(fk, fj.design)
    backward = predictive_kernel_many(fj, fk.design)
    # nugget slack can push the kernel slightly above 1
    return float(np.clip(max(forward.max(), backward.max()), 0.0, 1.0))


def rho_matrix(
    experts: Sequence[LocalExpert],
    pool: Optional[WorkerPool] = None,
    previous: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Symmetric K x K correlation estimates with unit diagonal.

    With ``previous`` (the matrix for the first K-1 experts) only the last row
    is computed.
    """
    pool = pool or serial_pool()
    K = len(experts)
    rho = np.eye(K)
    if previous is not None and previous.shape == (K - 1, K - 1):
        rho[: K - 1, : K - 1] = previous
        pairs = [(k, K - 1) for k in range(K - 1)]
    else:
        pairs = [(k, j) for k in range(K) for j in range(k + 1, K)]
    values = pool.map(lambda kj: estimate_rho(experts[kj[0]], experts[kj[1]]), pairs)
    for (k, j), value in zip(pairs, values):
        rho[k, j] = rho[j, k] = value
    return rho


def empirical_s2(y: np.ndarray) -> float:
    """Sample variance of the responses, floored away from zero"""
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] < 2:
        raise ValueError("empirical_s2 needs at least two responses")
    s2 = float(np.var(y, ddof=1))
    if s2 < S2_FLOOR:
        logger.warning(f"Response variance {s2:.3g} floored to {S2_FLOOR}")
        return S2_FLOOR
    return s2


def calibrate_tau2(s2: float, rho: np.ndarray) -> float:
    """Amplitude giving far-field ensemble variance s2 (1 + eta)"""
    total = float(np.sum(rho))
    if total <= 0:
        raise ValueError("Correlation matrix must have a positive sum")
    K = rho.shape[0]
    return s2 * K * K / total


def pooled_nugget(
    experts: Iterable[LocalExpert],
    tau2: float,
    normalization: Literal["mean", "size"] = "mean",
) -> Nugget:
    """One nugget for every expert: pooled in-sample MSE over tau2.

    ``mean`` averages the per-expert MSEs; ``size`` sums each MSE divided by
    its design size.
    """
    if tau2 <= 0:
        raise ValueError(f"tau2 must be positive, got {tau2}")
    experts: List[LocalExpert] = list(experts)
    mses = np.array([e.mse for e in experts])
    if normalization == "mean":
        mse = float(np.mean(mses))
    else:
        mse = float(np.sum(mses / np.array([e.size for e in experts])))
    return Nugget.floored(mse / tau2)
