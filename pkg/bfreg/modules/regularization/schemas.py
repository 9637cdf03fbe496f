"""Pydantic schemas for the Regularization module (run-config form of a strategy)."""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from bfreg.modules.regularization.models import StrategyKind, REGULARIZED


class StrategyConfig(BaseModel):
    """{type, lambda, eps_w, theta_lf_path, dropout_p} as it appears in a run config."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    type: StrategyKind
    # Report label; defaults to the type value
    name: Optional[str] = None
    lam: Optional[float] = Field(default=None, alias="lambda", gt=0)
    lambda_grid: Optional[list[float]] = Field(default=None, min_length=1)
    eps_w: float = Field(default=1e-5, gt=0)
    theta_lf_path: Optional[str] = None
    dropout_p: float = Field(default=0.0, ge=0, lt=1)

    @field_validator("lambda_grid")
    @classmethod
    def _positive_grid(cls, grid):
        if grid is not None and any(not v > 0 for v in grid):
            raise ValueError("lambda_grid entries must be > 0")
        return grid

    @property
    def label(self) -> str:
        return self.name or self.type.value

    def grid(self) -> list[float]:
        """Candidate λ values: the grid, else the single λ, else [0] for unregularized tags."""
        if self.type not in REGULARIZED:
            return [0.0]
        if self.lambda_grid:
            return list(self.lambda_grid)
        if self.lam is not None:
            return [self.lam]
        raise ValueError(f"strategy '{self.label}' needs 'lambda' or 'lambda_grid'")
