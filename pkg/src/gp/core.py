"""Dense GP fitting, prediction and likelihood-based hyperparameter inference.

Sized for local designs (n up to a few hundred); the Cholesky factor is the only
decomposition used.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial.distance import pdist
from tenacity import (
    before_sleep_log,
    retry,
    retry_if_exception_type,
    stop_after_attempt,
)

from ..errors import DegenerateDataError, DimensionError, FactorizationError
from .kernel import (
    JITTER,
    LengthscaleLike,
    _as_design,
    _as_point,
    as_lengthscales,
    corr_matrix,
    cross_corr_matrix,
)

logger = logging.getLogger(__name__)

THETA_MIN = 1e-3
TAU2_FLOOR = 1e-12
NUGGET_MAX = 10.0


@dataclass(frozen=True)
class GpFit:
    """A GP conditioned on a design under fixed hyperparameters"""

    design: np.ndarray
    responses: np.ndarray
    theta: np.ndarray
    tau2: float
    eta: float
    chol: np.ndarray
    alpha: np.ndarray
    # constant prior mean; alpha solves against y - mean
    mean: float = 0.0

    @property
    def size(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class MomentPrediction:
    mean: float
    variance: float


@dataclass(frozen=True)
class MleResult:
    theta: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class Hyperparameters:
    theta: np.ndarray
    eta: float
    converged: bool


def _factorize(K: np.ndarray, eta: float) -> np.ndarray:
    try:
        return cholesky(K, lower=True, check_finite=False)
    except LinAlgError as e:
        raise FactorizationError(K.shape[0], eta, str(e)) from e


def _prepare(X: np.ndarray, y: np.ndarray, theta: LengthscaleLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = _as_design(X)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"{X.shape[0]} design rows but {y.shape[0]} responses")
    if X.shape[0] < 1:
        raise ValueError("A GP needs at least one design point")
    return X, y, as_lengthscales(theta, X.shape[1])


def fit_gp(
    X: np.ndarray, y: np.ndarray, theta: LengthscaleLike, tau2: float, eta: float, mean: float = 0.0
) -> GpFit:
    """Factorize K_n and solve for K_n^{-1} (y - mean)"""
    X, y, theta = _prepare(X, y, theta)
    if not tau2 > 0:
        raise ValueError(f"tau2 must be positive, got {tau2}")
    L = _factorize(corr_matrix(X, theta, eta), eta)
    alpha = cho_solve((L, True), y - mean, check_finite=False)
    return GpFit(
        design=X,
        responses=y,
        theta=theta,
        tau2=float(tau2),
        eta=float(eta),
        chol=L,
        alpha=alpha,
        mean=float(mean),
    )


def refit(fit: GpFit, tau2: float, eta: float) -> GpFit:
    """Same design and lengthscales under a new amplitude and nugget"""
    return fit_gp(fit.design, fit.responses, fit.theta, tau2, eta, mean=fit.mean)


def predictive_kernel_many(fit: GpFit, Xq: np.ndarray) -> np.ndarray:
    """k(x)^T K^{-1} k(x) at every query row"""
    k = cross_corr_matrix(fit.design, Xq, fit.theta)
    V = solve_triangular(fit.chol, k, lower=True, check_finite=False)
    return np.sum(V * V, axis=0)


def gp_predict_many(fit: GpFit, Xq: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Predictive means and variances at every query row"""
    k = cross_corr_matrix(fit.design, Xq, fit.theta)
    means = fit.mean + k.T @ fit.alpha
    V = solve_triangular(fit.chol, k, lower=True, check_finite=False)
    variances = fit.tau2 * (1.0 + fit.eta - np.sum(V * V, axis=0))
    return means, np.maximum(variances, 0.0)


def gp_predict(fit: GpFit, x: np.ndarray) -> MomentPrediction:
    x = _as_point(x, fit.dim)
    means, variances = gp_predict_many(fit, x[None, :])
    return MomentPrediction(mean=float(means[0]), variance=float(variances[0]))


def profile_tau2(X: np.ndarray, y: np.ndarray, theta: LengthscaleLike, eta: float) -> float:
    """y^T K^{-1} y / n, floored away from zero"""
    X, y, theta = _prepare(X, y, theta)
    L = _factorize(corr_matrix(X, theta, eta), eta)
    q = float(y @ cho_solve((L, True), y, check_finite=False))
    return max(q / X.shape[0], TAU2_FLOOR)


def _concentrated(X: np.ndarray, y: np.ndarray, theta: np.ndarray, eta: float):
    n = X.shape[0]
    K = corr_matrix(X, theta, eta)
    L = _factorize(K, eta)
    alpha = cho_solve((L, True), y, check_finite=False)
    q = float(y @ alpha)
    tau2 = max(q / n, TAU2_FLOOR)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    ll = -0.5 * n * np.log(2.0 * np.pi * tau2) - 0.5 * logdet - 0.5 * q / tau2
    return ll, K, L, alpha, tau2


def log_likelihood(X: np.ndarray, y: np.ndarray, theta: LengthscaleLike, eta: float) -> float:
    """Gaussian log density with the amplitude profiled out"""
    X, y, theta = _prepare(X, y, theta)
    return float(_concentrated(X, y, theta, eta)[0])


def log_likelihood_grad(
    X: np.ndarray, y: np.ndarray, theta: LengthscaleLike, eta: float
) -> Tuple[float, np.ndarray]:
    """Concentrated log likelihood and its gradient in theta"""
    X, y, theta = _prepare(X, y, theta)
    n, d = X.shape
    ll, K, L, alpha, tau2 = _concentrated(X, y, theta, eta)
    K_inv = cho_solve((L, True), np.eye(n), check_finite=False)
    C = K - eta * np.eye(n)
    grad = np.empty(d)
    for l in range(d):
        D = (X[:, l, None] - X[None, :, l]) ** 2
        dK = C * D / theta[l] ** 2
        grad[l] = 0.5 * float(alpha @ dK @ alpha) / tau2 - 0.5 * float(np.sum(K_inv * dK))
    return float(ll), grad


def squared_diameter(X: np.ndarray) -> float:
    X = _as_design(X)
    if X.shape[0] < 2:
        return 0.0
    return float(np.max(pdist(X, metric="sqeuclidean")))


def default_theta_start(X: np.ndarray, seed: int = 0, size: int = 1000, quantile: float = 0.1) -> float:
    """Small quantile of squared pairwise distances over a sample of inputs"""
    X = _as_design(X)
    rng = np.random.default_rng(seed)
    if X.shape[0] > size:
        X = X[rng.choice(X.shape[0], size=size, replace=False)]
    D = pdist(X, metric="sqeuclidean")
    D = D[D > 0]
    if D.size == 0:
        return 1.0
    return max(float(np.quantile(D, quantile)), THETA_MIN)


def mle_lengthscale(
    X: np.ndarray,
    y: np.ndarray,
    eta: float,
    theta_max: LengthscaleLike,
    isotropic: bool = False,
    theta_start: Optional[float] = None,
    theta_min: float = THETA_MIN,
) -> MleResult:
    """Maximize the concentrated likelihood over log-lengthscales.

    L-BFGS-B with analytic gradients, stopping at gradient norm 1e-6 or 100
    iterations. With ``isotropic`` a single lengthscale is shared by every
    dimension and bounded by the largest component of ``theta_max``.
    A run that does not converge returns its best iterate with
    ``converged=False``.
    """
    X, y, _ = _prepare(X, y, 1.0)
    d = X.shape[1]
    theta_max = as_lengthscales(theta_max, d)
    upper = np.array([theta_max.max()]) if isotropic else theta_max.copy()
    lower = np.minimum(theta_min, upper)

    if np.all(upper <= lower) or X.shape[0] < 2:
        theta = np.full(d, upper[0]) if isotropic else upper
        return MleResult(theta, log_likelihood(X, y, theta, eta), True, 0)

    if theta_start is None:
        theta_start = default_theta_start(X)
    x0 = np.log(np.clip(np.full(upper.shape, theta_start), lower, upper))
    bounds = list(zip(np.log(lower), np.log(upper)))

    best = {"value": -np.inf, "psi": x0.copy()}

    def expand(psi: np.ndarray) -> np.ndarray:
        theta = np.exp(psi)
        return np.full(d, theta[0]) if isotropic else theta

    def objective(psi: np.ndarray):
        theta = expand(psi)
        try:
            ll, grad = log_likelihood_grad(X, y, theta, eta)
        except FactorizationError:
            return 1e25, np.zeros_like(psi)
        if ll > best["value"]:
            best["value"] = ll
            best["psi"] = psi.copy()
        dpsi = grad * theta
        if isotropic:
            dpsi = np.array([dpsi.sum()])
        return -ll, -dpsi

    res = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"gtol": 1e-6, "maxiter": 100},
    )
    if not res.success:
        logger.warning(f"Lengthscale MLE did not converge after {res.nit} iterations: {res.message}")

    theta = np.clip(expand(best["psi"]), np.min(lower), theta_max.max() if isotropic else theta_max)
    return MleResult(
        theta=theta,
        log_likelihood=float(best["value"]),
        converged=bool(res.success),
        iterations=int(res.nit),
    )


def mle_nugget(
    X: np.ndarray,
    y: np.ndarray,
    theta: LengthscaleLike,
    eta_bounds: Tuple[float, float] = (JITTER, NUGGET_MAX),
) -> float:
    """Bounded search for the likelihood-maximizing nugget on a log scale"""
    X, y, theta = _prepare(X, y, theta)
    lo, hi = np.log(eta_bounds[0]), np.log(eta_bounds[1])

    def objective(log_eta: float) -> float:
        try:
            return -float(_concentrated(X, y, theta, float(np.exp(log_eta)))[0])
        except FactorizationError:
            return 1e25

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
    return float(np.clip(np.exp(res.x), *eta_bounds))


def mle_hyperparameters(
    X: np.ndarray,
    y: np.ndarray,
    theta_max: LengthscaleLike,
    nugget_mode: Literal["jitter", "mle"] = "jitter",
    isotropic: bool = False,
    theta_start: Optional[float] = None,
    eta_start: float = 0.01,
    rounds: int = 2,
) -> Hyperparameters:
    """Lengthscales, plus the nugget in ``mle`` mode by alternating searches"""
    if nugget_mode == "jitter":
        result = mle_lengthscale(X, y, JITTER, theta_max, isotropic=isotropic, theta_start=theta_start)
        return Hyperparameters(theta=result.theta, eta=JITTER, converged=result.converged)

    eta = eta_start
    converged = True
    theta = None
    for _ in range(rounds):
        result = mle_lengthscale(X, y, eta, theta_max, isotropic=isotropic, theta_start=theta_start)
        theta = result.theta
        converged = result.converged
        theta_start = float(theta.max())
        eta = mle_nugget(X, y, theta)
    return Hyperparameters(theta=theta, eta=eta, converged=converged)


@retry(
    stop=stop_after_attempt(2),
    retry=retry_if_exception_type((DegenerateDataError, FactorizationError)),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)
def _subset_lengthscale(
    X: np.ndarray,
    y: np.ndarray,
    subset_size: int,
    rng: np.random.Generator,
    nugget_mode: Literal["jitter", "mle"],
) -> np.ndarray:
    idx = rng.choice(X.shape[0], size=subset_size, replace=False)
    Xs, ys = X[idx], y[idx]
    upper = squared_diameter(Xs)
    if upper <= 0:
        raise DegenerateDataError("Random subset has fewer than two distinct inputs")
    hyper = mle_hyperparameters(Xs, ys - ys.mean(), upper, nugget_mode=nugget_mode)
    return hyper.theta


def lengthscale_cap(
    X: np.ndarray,
    y: np.ndarray,
    num_subsets: int = 5,
    subset_size: int = 200,
    seed: int = 0,
    nugget_mode: Literal["jitter", "mle"] = "jitter",
) -> np.ndarray:
    """Component-wise largest lengthscale MLE over GPs on random subsets.

    Each subset GP is separable and searched up to the squared diameter of its
    subset. A degenerate subset is redrawn once before the error propagates.
    """
    X, y, _ = _prepare(X, y, 1.0)
    subset_size = min(subset_size, X.shape[0])
    if subset_size < 2:
        raise DegenerateDataError("lengthscale_cap needs at least two training points")
    if num_subsets < 1:
        raise ValueError("num_subsets must be at least 1")

    rng = np.random.default_rng(seed)
    thetas = [_subset_lengthscale(X, y, subset_size, rng, nugget_mode) for _ in range(num_subsets)]
    cap = np.max(np.vstack(thetas), axis=0)
    logger.info(f"Lengthscale cap from {num_subsets} subsets of {subset_size}: {np.round(cap, 5)}")
    return cap


def fit_separable_gp(
    X: np.ndarray, y: np.ndarray, nugget_mode: Literal["jitter", "mle"] = "jitter"
) -> GpFit:
    """Separable MLE up to the squared diameter, profile amplitude, factorized fit.

    The prior mean is the sample mean of the responses.
    """
    X, y, _ = _prepare(X, y, 1.0)
    upper = squared_diameter(X)
    if upper <= 0:
        raise DegenerateDataError("A GP fit needs at least two distinct inputs")
    level = float(np.mean(y))
    hyper = mle_hyperparameters(X, y - level, upper, nugget_mode=nugget_mode)
    tau2 = profile_tau2(X, y - level, hyper.theta, hyper.eta)
    return fit_gp(X, y, hyper.theta, tau2, hyper.eta, mean=level)
