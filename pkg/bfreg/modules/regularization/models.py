"""Regularization models – the tagged strategy configuration and per-run weight state."""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from bfreg.exceptions import ConfigurationError

DEFAULT_EPS_W = 1e-5


class StrategyKind(str, Enum):
    NONE = "none"
    L2 = "l2"
    DROPOUT = "dropout"
    L1_STANDARD = "l1_standard"                        # Strategy I
    L1_REWEIGHTED_HF = "l1_reweighted_hf"              # Strategy II
    L1_BIFIDELITY_DIFF = "l1_bifidelity_diff"          # Strategy III
    L1_BIFIDELITY_WEIGHTED = "l1_bifidelity_weighted"  # Strategy IV


REGULARIZED = {
    StrategyKind.L2, StrategyKind.L1_STANDARD, StrategyKind.L1_REWEIGHTED_HF,
    StrategyKind.L1_BIFIDELITY_DIFF, StrategyKind.L1_BIFIDELITY_WEIGHTED,
}
WEIGHTED = {StrategyKind.L1_REWEIGHTED_HF, StrategyKind.L1_BIFIDELITY_WEIGHTED}
BIFIDELITY = {StrategyKind.L1_BIFIDELITY_DIFF, StrategyKind.L1_BIFIDELITY_WEIGHTED}


@dataclass(frozen=True, eq=False)
class RegStrategy:
    kind: StrategyKind
    lam: float = 0.0
    eps_w: float = DEFAULT_EPS_W
    theta_lf: np.ndarray | None = None
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.kind in REGULARIZED and not self.lam > 0:
            raise ConfigurationError(f"{self.kind.value} needs lambda > 0, got {self.lam}")
        if self.kind in WEIGHTED and not self.eps_w > 0:
            raise ConfigurationError(f"{self.kind.value} needs eps_w > 0, got {self.eps_w}")
        if self.kind in BIFIDELITY:
            if self.theta_lf is None:
                raise ConfigurationError(f"{self.kind.value} needs low-fidelity parameters theta_lf")
            if not np.all(np.isfinite(self.theta_lf)):
                raise ConfigurationError("theta_lf must be finite")
        if self.kind == StrategyKind.DROPOUT and not 0 <= self.dropout_p < 1:
            raise ConfigurationError(f"dropout probability must be in [0, 1), got {self.dropout_p}")

    # Constructors mirroring the tag list
    @classmethod
    def none(cls) -> "RegStrategy":
        return cls(StrategyKind.NONE)

    @classmethod
    def l2(cls, lam: float) -> "RegStrategy":
        return cls(StrategyKind.L2, lam=lam)

    @classmethod
    def dropout(cls, p: float) -> "RegStrategy":
        return cls(StrategyKind.DROPOUT, dropout_p=p)

    @classmethod
    def l1_standard(cls, lam: float) -> "RegStrategy":
        return cls(StrategyKind.L1_STANDARD, lam=lam)

    @classmethod
    def l1_reweighted_hf(cls, lam: float, eps_w: float = DEFAULT_EPS_W) -> "RegStrategy":
        return cls(StrategyKind.L1_REWEIGHTED_HF, lam=lam, eps_w=eps_w)

    @classmethod
    def l1_bifidelity_diff(cls, lam: float, theta_lf: np.ndarray) -> "RegStrategy":
        return cls(StrategyKind.L1_BIFIDELITY_DIFF, lam=lam, theta_lf=np.asarray(theta_lf, dtype=np.float64))

    @classmethod
    def l1_bifidelity_weighted(cls, lam: float, theta_lf: np.ndarray, eps_w: float = DEFAULT_EPS_W) -> "RegStrategy":
        return cls(StrategyKind.L1_BIFIDELITY_WEIGHTED, lam=lam, eps_w=eps_w,
                   theta_lf=np.asarray(theta_lf, dtype=np.float64))

    def with_lambda(self, lam: float) -> "RegStrategy":
        return RegStrategy(self.kind, lam=lam, eps_w=self.eps_w, theta_lf=self.theta_lf, dropout_p=self.dropout_p)

    @property
    def is_bifidelity(self) -> bool:
        return self.kind in BIFIDELITY


@dataclass
class RegState:
    """Diagonal of the weight matrix W for the current iteration."""
    current_weights: np.ndarray

    def __post_init__(self):
        if not np.all(self.current_weights > 0):
            raise ConfigurationError("regularization weights must be strictly positive")
