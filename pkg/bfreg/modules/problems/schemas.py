"""Pydantic schemas for the Problems module (CSV rows and dataset bundles)."""
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class BeamRow(BaseModel):
    """One beam CSV row: inputs in input units, y the tip deflection in metres."""
    model_config = ConfigDict(extra="forbid")

    q: float = Field(..., gt=0)
    E1: float = Field(..., gt=0)
    E2: float = Field(..., gt=0)
    E3: float = Field(..., gt=0)
    y: float

    @field_validator("y")
    @classmethod
    def _finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value


class SplitSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: list[list[float]] = Field(..., min_length=1)
    y: list[list[float]] = Field(..., min_length=1)
    inputs: Optional[list[list[float]]] = None


class DatasetBundle(BaseModel):
    """JSON form of a BiFidelityDataset with its meta {problem, seed, grids, units}."""
    model_config = ConfigDict(extra="forbid")

    meta: dict
    lo: SplitSchema
    hi: SplitSchema
    val: SplitSchema
