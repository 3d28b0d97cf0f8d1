from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PalmConfig(BaseModel):
    """Fitting knobs shared by local experts, PALM aggregation and center selection"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Local expert design
    n: int = Field(50, ge=2, description="local design size")
    n0: int = Field(6, ge=1, description="nearest-neighbor seed size")
    n_cand: int = Field(1000, ge=1, description="ALC candidate pool size")

    # Hyperparameters
    isotropic: bool = True
    nugget_mode: Literal["jitter", "mle"] = "jitter"
    cap_subsets: int = Field(5, ge=1)
    cap_subset_size: int = Field(200, ge=2)

    # Aggregation
    power: Optional[float] = Field(None, gt=0)
    mse_normalization: Literal["mean", "size"] = "mean"
    incremental_rho: bool = False

    # Sequential center selection
    multistarts: int = Field(10, ge=1)
    optimizer_budget: int = Field(200, ge=10)
    residual_subsample: Optional[int] = Field(None, ge=1)

    # Two-stage Global+PALM
    m_global: int = Field(1000, ge=2)
    additive_variance: bool = False

    @model_validator(mode="after")
    def _check_sizes(self) -> "PalmConfig":
        if self.n0 >= self.n:
            raise ValueError(f"n0 ({self.n0}) must be smaller than n ({self.n})")
        return self
