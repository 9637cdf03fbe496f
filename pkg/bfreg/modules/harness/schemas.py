"""Pydantic schemas for the Harness module (run configuration files)."""
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from bfreg.modules.regularization import StrategyConfig


class CountsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    N_l: int = Field(..., ge=1)
    N_h: int = Field(..., ge=1)
    N_val: int = Field(..., ge=1)
    R: int = Field(default=1, ge=1)
    inits: int = Field(default=10, ge=1)


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["adam", "sgd"] = "adam"
    eta: float = Field(default=1e-4, gt=0)
    iters: int = Field(default=5000, ge=1)
    b_m: float = Field(default=0.9, gt=0, lt=1)
    b_v: float = Field(default=0.999, gt=0, lt=1)
    eps_a: float = Field(default=1e-8, gt=0)
    batch_size: Optional[int] = Field(default=None, ge=1)
    eval_every: int = Field(default=1, ge=1)


class LofiConfig(BaseModel):
    """Training of the low-fidelity network (standard l1 at strength ``lam``)."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: float = Field(default=0.01, alias="lambda", gt=0)
    eta: float = Field(default=1e-3, gt=0)
    iters: int = Field(default=5000, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    eval_every: int = Field(default=1, ge=1)
    # Share of low-fidelity samples held out to pick the best iterate
    holdout: float = Field(default=0.2, gt=0, lt=1)


class ArchConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["fnn", "autoencoder"] = "fnn"
    input_dim: Optional[int] = Field(default=None, ge=1)
    hidden: list[int] = Field(default_factory=list)
    output_dim: Optional[int] = Field(default=None, ge=1)
    encoder: list[int] = Field(default_factory=list)
    decoder: list[int] = Field(default_factory=list)
    activation: Literal["relu", "elu", "tanh", "identity"] = "elu"
    output_activation: Literal["relu", "elu", "tanh", "identity"] = "identity"
    alpha: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_layout(self):
        if any(width < 1 for width in self.hidden + self.encoder + self.decoder):
            raise ValueError("layer widths must be >= 1")
        if self.kind == "autoencoder" and not self.encoder:
            raise ValueError("autoencoder needs at least one encoder layer")
        return self


class RunConfig(BaseModel):
    """{problem, arch, strategies, counts, optimizer, lofi, seed, scale, ...}.

    A single ``strategy`` entry plus a top-level ``lambda_grid`` is accepted as
    shorthand for a one-element ``strategies`` list.
    """
    model_config = ConfigDict(extra="forbid")

    problem: Literal["beam", "nozzle", "tabular"]
    scale: Literal["desk", "full", "custom"] = "custom"
    seed: Optional[int] = None
    arch: ArchConfig = Field(default_factory=ArchConfig)
    strategies: list[StrategyConfig] = Field(..., min_length=1)
    counts: CountsConfig
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    lofi: LofiConfig = Field(default_factory=LofiConfig)

    standardize_x: bool = True
    standardize_y: bool = True
    qoi: Literal["output", "shock"] = "output"
    warm_start: bool = True
    warm_start_noise: float = Field(default=0.01, ge=0)

    n_elems: int = Field(default=200, ge=50)
    lo_grid: int = Field(default=52, ge=8)
    hi_grid: int = Field(default=1048, ge=8)
    lo_csv: Optional[str] = None
    hi_csv: Optional[str] = None
    val_csv: Optional[str] = None
    # Validation samples whose reconstructions are exported (autoencoders)
    export_reconstructions: int = Field(default=4, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _single_strategy(cls, data):
        if isinstance(data, dict) and "strategy" in data:
            data = dict(data)
            strategy = dict(data.pop("strategy"))
            if "lambda_grid" in data:
                strategy["lambda_grid"] = data.pop("lambda_grid")
            if "strategies" in data:
                raise ValueError("give either 'strategy' or 'strategies', not both")
            data["strategies"] = [strategy]
        return data

    @model_validator(mode="after")
    def _unique_labels(self):
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"strategy labels must be unique, got {labels}")
        return self
