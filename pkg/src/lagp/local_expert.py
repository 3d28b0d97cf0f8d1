"""Local approximate GP experts.

An expert starts from the nearest neighbors of its center and grows its design
greedily by active learning Cohn (ALC): each step adds the candidate that most
reduces predictive variance at the center. Lengthscales are fitted once, on the
final design.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from ..config.model_config import PalmConfig
from ..errors import DegenerateDataError, DimensionError
from ..gp.core import (
    GpFit,
    MomentPrediction,
    _factorize,
    fit_gp,
    gp_predict,
    mle_hyperparameters,
    profile_tau2,
    refit,
)
from ..gp.kernel import (
    JITTER,
    LengthscaleLike,
    as_lengthscales,
    corr_matrix,
    cross_corr_matrix,
    cross_corr_vec,
)
from ..testbed.data import TrainingSet

logger = logging.getLogger(__name__)

# Nugget used while growing a design before a nugget has been estimated
GREEDY_NUGGET = 0.01
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class LocalExpert:
    """A GP fitted on a greedily selected subset of the training data"""

    center: np.ndarray
    design_indices: np.ndarray
    fit: GpFit
    mse: float
    # the fit under the expert's own amplitude and nugget, before recalibration
    provisional: Optional[GpFit] = None

    @property
    def size(self) -> int:
        return self.design_indices.shape[0]

    @property
    def provisional_fit(self) -> GpFit:
        return self.fit if self.provisional is None else self.provisional

    def recalibrated(self, tau2: float, eta: float) -> "LocalExpert":
        """Same design and lengthscales, refactorized under a shared tau2 and eta"""
        return replace(self, fit=refit(self.fit, tau2, eta), provisional=self.provisional_fit)


class AlcScore(NamedTuple):
    reduction: float
    degenerate: bool


@dataclass(frozen=True)
class AlcDesign:
    indices: np.ndarray
    # Predictive variance at the center after each design size n0, n0+1, ..., n
    center_variances: np.ndarray


def nearest_neighbors(X: np.ndarray, x: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m rows closest to x; ties go to the lower index"""
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if X.shape[1] != x.shape[0]:
        raise DimensionError(f"Point has dimension {x.shape[0]}, rows have {X.shape[1]}")
    if m > X.shape[0]:
        raise ValueError(f"Asked for {m} neighbors among {X.shape[0]} rows")
    d2 = np.sum((X - x) ** 2, axis=1)
    return np.argsort(d2, kind="stable")[:m]


def _alc_scores(
    L: np.ndarray,
    design: np.ndarray,
    candidates: np.ndarray,
    ref: np.ndarray,
    theta: np.ndarray,
    eta: float,
    tau2: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Variance reduction at ref for each candidate, via partitioned inverse.

    Adding candidate c lowers the variance at ref by
    tau2 * (k(c, ref) - k_c^T K^{-1} k_ref)^2 / (1 + eta - k_c^T K^{-1} k_c),
    which costs two triangular solves against the existing factor.
    """
    V = solve_triangular(L, cross_corr_matrix(design, candidates, theta), lower=True, check_finite=False)
    v_ref = solve_triangular(L, cross_corr_vec(design, ref, theta), lower=True, check_finite=False)
    c_ref = cross_corr_vec(candidates, ref, theta)
    denom = 1.0 + eta - np.sum(V * V, axis=0)
    numer = (c_ref - V.T @ v_ref) ** 2
    ok = denom > DEGENERATE_TOL
    scores = np.zeros_like(denom)
    scores[ok] = tau2 * numer[ok] / denom[ok]
    return scores, V, denom


def alc_reduction(fit: GpFit, candidate: np.ndarray, ref: np.ndarray) -> AlcScore:
    """Drop in predictive variance at ref if candidate joined the design"""
    candidate = np.atleast_1d(np.asarray(candidate, dtype=float))
    ref = np.atleast_1d(np.asarray(ref, dtype=float))
    scores, _, denom = _alc_scores(
        fit.chol, fit.design, candidate[None, :], ref, fit.theta, fit.eta, fit.tau2
    )
    if denom[0] <= DEGENERATE_TOL:
        logger.debug("ALC candidate duplicates a design point at zero nugget")
        return AlcScore(0.0, True)
    return AlcScore(float(scores[0]), False)


def greedy_alc_design(
    X: np.ndarray,
    center: np.ndarray,
    n: int,
    n0: int,
    n_cand: int,
    theta: LengthscaleLike,
    eta: float,
) -> AlcDesign:
    """Seed with n0 nearest neighbors, then add ALC maximizers until n points"""
    N, d = X.shape
    if N < n:
        raise DegenerateDataError(f"Local design of size {n} needs at least {n} training points, got {N}")
    theta = as_lengthscales(theta, d)
    order = nearest_neighbors(X, center, min(N, n + n_cand))
    chosen: List[int] = list(order[:n0])
    taken = np.zeros(order.shape[0], dtype=bool)
    taken[:n0] = True

    L = _factorize(corr_matrix(X[chosen], theta, eta), eta)
    v_ref = solve_triangular(L, cross_corr_vec(X[chosen], center, theta), lower=True)
    variances = [1.0 + eta - float(v_ref @ v_ref)]

    while len(chosen) < n:
        pool_size = min(n_cand, N - len(chosen))
        positions = np.flatnonzero(~taken)[:pool_size]
        candidates = order[positions]
        scores, V, denom = _alc_scores(L, X[chosen], X[candidates], center, theta, eta)
        j = int(np.argmax(scores))
        if denom[j] <= DEGENERATE_TOL:
            raise DegenerateDataError("Every ALC candidate duplicates the current design")

        # Cholesky insert: append the row [V_j^T, sqrt(denom_j)]
        m = L.shape[0]
        grown = np.zeros((m + 1, m + 1))
        grown[:m, :m] = L
        grown[m, :m] = V[:, j]
        grown[m, m] = np.sqrt(denom[j])
        L = grown

        chosen.append(int(candidates[j]))
        taken[positions[j]] = True
        v_ref = solve_triangular(L, cross_corr_vec(X[chosen], center, theta), lower=True)
        variances.append(1.0 + eta - float(v_ref @ v_ref))

    return AlcDesign(indices=np.asarray(chosen, dtype=int), center_variances=np.asarray(variances))


def build_local_expert(
    data: TrainingSet,
    center: np.ndarray,
    cfg: PalmConfig,
    theta_max: LengthscaleLike,
    theta_start: float,
    tau2: Optional[float] = None,
    eta: Optional[float] = None,
) -> LocalExpert:
    """Greedy ALC design around a coded center, then hyperparameter fitting.

    ``tau2`` and ``eta`` default to the expert's own profile amplitude and
    nugget (jitter, or the likelihood estimate in ``mle`` mode). The prior mean
    is the average response over the design. The in-sample MSE uses smoothed
    fitted values, which for a GP are y - eta * K^{-1} (y - mean).
    """
    X, y = data.coded_X, data.y
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape[0] != data.dim:
        raise DimensionError(f"Center has dimension {center.shape[0]}, data has {data.dim}")
    if data.size < cfg.n:
        raise DegenerateDataError(f"Local design of size {cfg.n} needs at least {cfg.n} training points")

    theta_max = as_lengthscales(theta_max, data.dim)
    greedy_theta = np.minimum(theta_start, theta_max.max() if cfg.isotropic else theta_max)
    greedy_eta = JITTER if cfg.nugget_mode == "jitter" else GREEDY_NUGGET
    if data.size == cfg.n:
        indices = nearest_neighbors(X, center, data.size)
    else:
        indices = greedy_alc_design(X, center, cfg.n, cfg.n0, cfg.n_cand, greedy_theta, greedy_eta).indices

    Xd, yd = X[indices], y[indices]
    level = float(np.mean(yd))
    hyper = mle_hyperparameters(
        Xd, yd - level, theta_max, nugget_mode=cfg.nugget_mode, isotropic=cfg.isotropic, theta_start=theta_start
    )
    eta_fit = hyper.eta if eta is None else eta
    tau2_fit = profile_tau2(Xd, yd - level, hyper.theta, eta_fit) if tau2 is None else tau2
    fit = fit_gp(Xd, yd, hyper.theta, tau2_fit, eta_fit, mean=level)
    mse = float(np.mean((eta_fit * fit.alpha) ** 2))
    logger.debug(
        f"Expert at {np.round(center, 4)}: theta={np.round(hyper.theta, 5)} "
        f"eta={eta_fit:.3g} tau2={tau2_fit:.4g} mse={mse:.3g}"
    )
    return LocalExpert(center=center, design_indices=indices, fit=fit, mse=mse)


def expert_predict(e: LocalExpert, x: np.ndarray) -> MomentPrediction:
    return gp_predict(e.fit, x)
