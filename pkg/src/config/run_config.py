"""Experiment configuration: flat key=value files overlaid by command-line flags."""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigurationError
from .model_config import PalmConfig
from .settings import settings

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """One experiment: data generation, model choice and output location"""

    model_config = ConfigDict(extra="forbid")

    # Data
    function: Literal["herbie", "glee", "michalewicz", "sine"] = "herbie"
    dim: Optional[int] = Field(None, ge=1, description="only michalewicz takes a dimension")
    train_grid: int = Field(50, ge=2, description="training points per dimension")
    test_grid: int = Field(51, ge=1, description="shifted test points per dimension")
    noise_sd: float = Field(0.0, ge=0)

    # Model
    model: Literal["palm", "global+palm"] = "palm"
    K: int = Field(25, ge=1)
    n: int = Field(50, ge=2)
    n0: int = Field(6, ge=1)
    n_cand: int = Field(1000, ge=1)
    power: Optional[float] = Field(None, gt=0)
    nugget_mode: Literal["jitter", "mle"] = "jitter"
    isotropic: bool = True
    cap_subsets: int = Field(5, ge=1)
    cap_subset_size: int = Field(200, ge=2)
    mse_normalization: Literal["mean", "size"] = "mean"
    incremental_rho: bool = False
    center_mode: Literal["spacefill", "sequential"] = "spacefill"
    K_init: int = Field(5, ge=1)
    M_s: int = Field(10, ge=1)
    optimizer_budget: int = Field(200, ge=10)
    residual_subsample: Optional[int] = Field(None, ge=1)
    m_global: int = Field(1000, ge=2)
    additive_variance: bool = False

    # Run
    slice_points: int = Field(401, ge=2, description="points on the bench slice")
    seed: int = Field(0, ge=0, lt=2**64)
    out: str = settings.PALM_OUTPUT_DIR

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.n0 >= self.n:
            raise ValueError(f"n0 ({self.n0}) must be smaller than n ({self.n})")
        if self.center_mode == "sequential" and self.K_init > self.K:
            raise ValueError(f"K_init ({self.K_init}) cannot exceed K ({self.K})")
        return self

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def palm_config(self) -> PalmConfig:
        return PalmConfig(
            n=self.n,
            n0=self.n0,
            n_cand=self.n_cand,
            isotropic=self.isotropic,
            nugget_mode=self.nugget_mode,
            cap_subsets=self.cap_subsets,
            cap_subset_size=self.cap_subset_size,
            power=self.power,
            mse_normalization=self.mse_normalization,
            incremental_rho=self.incremental_rho,
            multistarts=self.M_s,
            optimizer_budget=self.optimizer_budget,
            residual_subsample=self.residual_subsample,
            m_global=self.m_global,
            additive_variance=self.additive_variance,
        )


def parse_assignments(lines: Iterable[str], source: str = "<flags>") -> Dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped"""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{source}:{lineno}: expected key=value, got '{raw.strip()}'")
        values[key.strip()] = value.strip()
    return values


def read_config_file(path: Path) -> Dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_assignments(f, source=str(path))
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e


def load_run_config(
    path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
    defaults: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Defaults, then the config file, then overrides (flags win)"""
    values: Dict[str, Any] = dict(defaults or {})
    if path is not None:
        values.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    # empty strings mean "unset" for optional fields
    values = {k: (None if v == "" else v) for k, v in values.items()}
    try:
        config = RunConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid run configuration: {e}") from e
    logger.debug(f"Run config: {config.model_dump()}")
    return config
