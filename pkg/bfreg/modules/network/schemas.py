"""Pydantic schemas for the Network module (parameter dump files)."""
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Literal


class LayerSpecSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    in_dim: int = Field(..., ge=1)
    out_dim: int = Field(..., ge=1)
    activation: Literal["relu", "elu", "tanh", "identity"]
    alpha: float = Field(default=1.0, gt=0)


class ParamDump(BaseModel):
    """{spec, flat_theta} – the on-disk form of a trained network."""
    model_config = ConfigDict(extra="forbid")

    spec: list[LayerSpecSchema] = Field(..., min_length=1)
    flat_theta: list[float]
    n_encoder_layers: int | None = None

    @model_validator(mode="after")
    def _check_layout(self):
        for j in range(len(self.spec) - 1):
            if self.spec[j].out_dim != self.spec[j + 1].in_dim:
                raise ValueError(f"spec layers {j} and {j + 1} do not chain")
        expected = sum(s.out_dim * s.in_dim + s.out_dim for s in self.spec)
        if len(self.flat_theta) != expected:
            raise ValueError(f"flat_theta has {len(self.flat_theta)} entries, spec needs {expected}")
        return self
