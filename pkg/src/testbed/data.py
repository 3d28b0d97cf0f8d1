import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionError, PalmError
from ..gp.kernel import InputCoding
from ..storage.files import PathLike, StagedFiles, read_table, write_rows, write_table

logger = logging.getLogger(__name__)

Bounds = Sequence[Tuple[float, float]]


@dataclass(frozen=True)
class TrainingSet:
    """Inputs in natural units, responses, and the unit-coding map"""

    X: np.ndarray
    y: np.ndarray
    coding: InputCoding
    coded_X: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} input rows but {y.shape[0]} responses")
        if X.shape[1] != self.coding.dim:
            raise DimensionError(f"Inputs have {X.shape[1]} columns, coding has {self.coding.dim}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise PalmError("Training data contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "coded_X", self.coding.encode(X))

    @classmethod
    def from_arrays(cls, X: np.ndarray, y: np.ndarray, bounds: Optional[Bounds] = None) -> "TrainingSet":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        coding = InputCoding.from_bounds(bounds) if bounds is not None else InputCoding.from_data(X)
        return cls(X=X, y=y, coding=coding)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, indices: np.ndarray) -> "TrainingSet":
        indices = np.asarray(indices, dtype=int)
        return TrainingSet(X=self.X[indices], y=self.y[indices], coding=self.coding)

    def with_responses(self, y: np.ndarray) -> "TrainingSet":
        return TrainingSet(X=self.X, y=y, coding=self.coding)


def grid_design(points_per_dim: int, bounds: Bounds) -> np.ndarray:
    """Full-factorial grid with inclusive endpoints; the first dimension varies slowest"""
    if points_per_dim < 2:
        raise ValueError(f"points_per_dim must be at least 2, got {points_per_dim}")
    axes = [np.linspace(lo, hi, points_per_dim) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def shifted_grid_design(points_per_dim: int, bounds: Bounds) -> np.ndarray:
    """Cell-midpoint grid; disjoint from any inclusive grid with an even point count"""
    if points_per_dim < 1:
        raise ValueError(f"points_per_dim must be positive, got {points_per_dim}")
    axes = [
        lo + (np.arange(points_per_dim) + 0.5) * (hi - lo) / points_per_dim
        for lo, hi in bounds
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def add_noise(y: np.ndarray, sd: float, seed: int) -> np.ndarray:
    """y plus iid N(0, sd^2) draws from a seeded generator"""
    if sd < 0:
        raise ValueError(f"Noise sd must be nonnegative, got {sd}")
    y = np.asarray(y, dtype=float)
    if sd == 0:
        return y.copy()
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, sd, size=y.shape)


def dataset_header(dim: int) -> list:
    return [f"x{j + 1}" for j in range(dim)] + ["y"]


def write_dataset(path: PathLike, X: np.ndarray, y: np.ndarray, stage: Optional[StagedFiles] = None) -> None:
    """Headered x1..xd,y CSV; with ``stage`` the file only lands when the stage commits"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header, rows = dataset_header(X.shape[1]), (list(row) + [val] for row, val in zip(X, y))
    if stage is None:
        write_table(path, header, rows)
    else:
        write_rows(stage.open(path), header, rows)


def read_dataset(path: PathLike, bounds: Optional[Bounds] = None) -> TrainingSet:
    """Load a headered x1..xd,y CSV"""
    header, data = read_table(path)
    if len(header) < 2 or header[-1] != "y":
        raise PalmError(f"{path}: expected columns x1..xd,y, got {header}")
    return TrainingSet.from_arrays(data[:, :-1], data[:, -1], bounds=bounds)


def read_inputs(path: PathLike, dim: int) -> np.ndarray:
    """Load a headered x1..xd CSV (extra columns such as y are ignored)"""
    header, data = read_table(path)
    expected = [f"x{j + 1}" for j in range(dim)]
    if header[:dim] != expected:
        raise PalmError(f"{path}: expected leading columns {expected}, got {header}")
    return data[:, :dim]
