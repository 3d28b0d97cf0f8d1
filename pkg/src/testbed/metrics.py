import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import norm

COVERAGE_LEVEL = 0.9


class MetricReport(BaseModel):
    """Out-of-sample accuracy of one method on one test set"""

    method: str
    K: int = 0
    rmse: float = Field(ge=0)
    mae: float = Field(ge=0)
    score: float
    coverage_90: float = Field(ge=0, le=1)
    wall_time_fit: float = Field(0.0, ge=0)
    wall_time_predict: float = Field(0.0, ge=0)


def _pair(y: np.ndarray, mu: np.ndarray):
    y = np.asarray(y, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    if y.shape != mu.shape:
        raise ValueError(f"Responses ({y.shape[0]}) and predictions ({mu.shape[0]}) differ in length")
    return y, mu


def rmse(y: np.ndarray, mu: np.ndarray) -> float:
    y, mu = _pair(y, mu)
    return float(np.sqrt(np.mean((y - mu) ** 2)))


def mae(y: np.ndarray, mu: np.ndarray) -> float:
    y, mu = _pair(y, mu)
    return float(np.mean(np.abs(y - mu)))


def score(y: np.ndarray, mu: np.ndarray, sigma2: np.ndarray) -> float:
    """Mean of -(y - mu)^2 / sigma2 - log sigma2; higher is better"""
    y, mu = _pair(y, mu)
    sigma2 = np.asarray(sigma2, dtype=float).ravel()
    if np.any(~(sigma2 > 0)):
        raise ValueError("score needs strictly positive predictive variances")
    return float(np.mean(-((y - mu) ** 2) / sigma2 - np.log(sigma2)))


def coverage(y: np.ndarray, mu: np.ndarray, sigma2: np.ndarray, level: float = COVERAGE_LEVEL) -> float:
    """Fraction of responses inside the central `level` Gaussian interval"""
    if not 0 <= level < 1:
        raise ValueError(f"Coverage level must be in [0, 1), got {level}")
    y, mu = _pair(y, mu)
    z = norm.ppf(0.5 + level / 2.0)
    half_width = z * np.sqrt(np.maximum(np.asarray(sigma2, dtype=float).ravel(), 0.0))
    return float(np.mean(np.abs(y - mu) <= half_width))


def evaluate(method: str, y: np.ndarray, mu: np.ndarray, sigma2: np.ndarray, K: int = 0, **timings) -> MetricReport:
    return MetricReport(
        method=method,
        K=K,
        rmse=rmse(y, mu),
        mae=mae(y, mu),
        score=score(y, mu, sigma2),
        coverage_90=coverage(y, mu, sigma2),
        **timings,
    )
