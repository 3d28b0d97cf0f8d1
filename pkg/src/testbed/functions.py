"""Synthetic response surfaces used by the benchmarks.

Every function accepts one point (a d-vector) or a batch (M x d rows) and
returns a float or an M-vector accordingly.
"""

from typing import Callable, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

ArrayOrFloat = Union[float, np.ndarray]


def _rows(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    return np.atleast_2d(x), single


def _out(values: np.ndarray, single: bool) -> ArrayOrFloat:
    return float(values[0]) if single else values


def herbie_factor(z: np.ndarray) -> np.ndarray:
    return np.exp(-((z - 1.0) ** 2)) + np.exp(-0.8 * (z + 1.0) ** 2) - 0.05 * np.sin(8.0 * (z + 0.1))


def herbies_tooth(x: np.ndarray) -> ArrayOrFloat:
    """Herbie's tooth: minus the product of a bumpy 1d factor over coordinates"""
    X, single = _rows(x)
    return _out(-np.prod(herbie_factor(X), axis=1), single)


def gramacy_lee_2d(x: np.ndarray) -> ArrayOrFloat:
    X, single = _rows(x)
    if X.shape[1] != 2:
        raise ValueError(f"gramacy_lee_2d takes 2 inputs, got {X.shape[1]}")
    return _out(X[:, 0] * np.exp(-X[:, 0] ** 2 - X[:, 1] ** 2), single)


def michalewicz(x: np.ndarray, m: int = 10) -> ArrayOrFloat:
    """-sum_i sin(x_i) sin^{2m}(i x_i^2 / pi), with i counted from 1"""
    if m < 1:
        raise ValueError(f"Steepness m must be at least 1, got {m}")
    X, single = _rows(x)
    i = np.arange(1, X.shape[1] + 1)
    terms = np.sin(X) * np.sin(i * X**2 / np.pi) ** (2 * m)
    return _out(-terms.sum(axis=1), single)


def sine_wave(x: ArrayOrFloat) -> ArrayOrFloat:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[:, 0]
    values = np.sin(x)
    return float(values) if values.ndim == 0 else values


class Surface(NamedTuple):
    name: str
    fn: Callable[[np.ndarray], ArrayOrFloat]
    dim: int
    bounds: List[Tuple[float, float]]

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return np.atleast_1d(self.fn(X)).astype(float)


HERBIE_BOUNDS = [(-2.0, 2.0), (-2.0, 2.0)]
GRAMACY_LEE_BOUNDS = [(-2.0, 6.0), (-2.0, 6.0)]
SINE_BOUNDS = [(0.0, 20.0)]


def michalewicz_bounds(d: int) -> List[Tuple[float, float]]:
    return [(0.0, float(np.pi))] * d


FUNCTIONS: Dict[str, Surface] = {
    "herbie": Surface("herbie", herbies_tooth, 2, HERBIE_BOUNDS),
    "glee": Surface("glee", gramacy_lee_2d, 2, GRAMACY_LEE_BOUNDS),
    "michalewicz": Surface("michalewicz", michalewicz, 3, michalewicz_bounds(3)),
    "sine": Surface("sine", sine_wave, 1, SINE_BOUNDS),
}


def get_function(name: str, dim: Optional[int] = None) -> Surface:
    """Look up a surface; only michalewicz accepts a dimension other than its default"""
    try:
        surface = FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"Unknown test function '{name}'; choose from {sorted(FUNCTIONS)}") from None
    if dim is None or dim == surface.dim:
        return surface
    if name != "michalewicz":
        raise ValueError(f"Test function '{name}' is defined for d={surface.dim} only, got d={dim}")
    if dim < 1:
        raise ValueError(f"Dimension must be positive, got {dim}")
    return surface._replace(dim=dim, bounds=michalewicz_bounds(dim))
