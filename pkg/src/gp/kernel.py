"""Separable Gaussian correlation kernel.

Every GP in the toolkit works on unit-coded inputs, so lengthscales are in
squared coded-distance units per dimension.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import DimensionError

logger = logging.getLogger(__name__)

# Nugget used for deterministic (interpolating) data on unit-coded inputs
JITTER = 1e-8

LengthscaleLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Nugget:
    """Diagonal inflation of the correlation matrix"""

    eta: float
    is_jitter: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.eta) or self.eta < 0:
            raise ValueError(f"Nugget must be finite and nonnegative, got {self.eta}")
        if self.is_jitter and self.eta < JITTER:
            raise ValueError(f"Jitter nugget {self.eta} is below the floor {JITTER}")

    @classmethod
    def jitter(cls) -> "Nugget":
        return cls(JITTER, is_jitter=True)

    @classmethod
    def floored(cls, eta: float) -> "Nugget":
        """Nugget with values below the jitter floor replaced by jitter"""
        if eta < JITTER:
            return cls.jitter()
        return cls(float(eta))


@dataclass(frozen=True)
class InputCoding:
    """Affine map between natural inputs and the unit cube"""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def from_bounds(cls, bounds) -> "InputCoding":
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        return cls(lo=bounds[:, 0].copy(), hi=bounds[:, 1].copy())

    @classmethod
    def from_data(cls, X: np.ndarray) -> "InputCoding":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(lo=X.min(axis=0), hi=X.max(axis=0))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def _span(self) -> np.ndarray:
        span = self.hi - self.lo
        # zero-width dimensions code to 0
        return np.where(span > 0, span, 1.0)

    def encode(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DimensionError(f"Expected inputs with {self.dim} columns, got {X.shape[-1]}")
        return (X - self.lo) / self._span

    def decode(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape[-1] != self.dim:
            raise DimensionError(f"Expected inputs with {self.dim} columns, got {U.shape[-1]}")
        return self.lo + U * self._span


def as_lengthscales(theta: LengthscaleLike, d: int) -> np.ndarray:
    """Validate lengthscales, replicating a scalar across d dimensions"""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = np.full(d, float(theta))
    if theta.shape != (d,):
        raise DimensionError(f"Lengthscales have shape {theta.shape}, inputs have dimension {d}")
    if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
        raise ValueError(f"Lengthscales must be finite and strictly positive, got {theta}")
    return theta


def _as_design(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"Design must be a matrix, got shape {X.shape}")
    return X


def _as_point(x: np.ndarray, d: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise DimensionError(f"Point has shape {x.shape}, expected ({d},)")
    return x


def sq_exp_corr(x1: np.ndarray, x2: np.ndarray, theta: LengthscaleLike) -> float:
    """exp(-sum_l (x1_l - x2_l)^2 / theta_l)"""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    d = x1.shape[0]
    x2 = _as_point(x2, d)
    theta = as_lengthscales(theta, d)
    return float(np.exp(-np.sum((x1 - x2) ** 2 / theta)))


def scaled_sqdist(X1: np.ndarray, X2: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Squared distances after dividing each dimension by sqrt(theta)"""
    scale = np.sqrt(theta)
    return cdist(X1 / scale, X2 / scale, metric="sqeuclidean")


def corr_matrix(X: np.ndarray, theta: LengthscaleLike, eta: float) -> np.ndarray:
    """K = C + eta * I over the rows of X"""
    X = _as_design(X)
    n, d = X.shape
    if n < 1:
        raise ValueError("corr_matrix needs at least one row")
    theta = as_lengthscales(theta, d)
    K = np.exp(-scaled_sqdist(X, X, theta))
    # cdist is symmetric up to rounding; enforce exact symmetry
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0 + eta)
    if eta == 0 and n > 1 and np.unique(X, axis=0).shape[0] < n:
        logger.warning("Duplicate design rows with zero nugget; factorization will fail")
    return K


def cross_corr_matrix(X: np.ndarray, Xq: np.ndarray, theta: LengthscaleLike) -> np.ndarray:
    """n x m correlations between design rows and query rows (no nugget)"""
    X = _as_design(X)
    Xq = _as_design(Xq)
    if Xq.shape[1] != X.shape[1]:
        raise DimensionError(f"Query dimension {Xq.shape[1]} != design dimension {X.shape[1]}")
    theta = as_lengthscales(theta, X.shape[1])
    return np.exp(-scaled_sqdist(X, Xq, theta))


def cross_corr_vec(X: np.ndarray, x: np.ndarray, theta: LengthscaleLike) -> np.ndarray:
    X = _as_design(X)
    x = _as_point(x, X.shape[1])
    return cross_corr_matrix(X, x[None, :], theta)[:, 0]
