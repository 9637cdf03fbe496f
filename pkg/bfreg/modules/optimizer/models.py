"""Optimizer models – Adam hyperparameters and moment state."""
from dataclasses import dataclass

import numpy as np

from bfreg.exceptions import ConfigurationError


@dataclass(frozen=True)
class AdamConfig:
    eta: float
    b_m: float = 0.9
    b_v: float = 0.999
    eps_a: float = 1e-8

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.eta}")
        if not (0 < self.b_m < 1 and 0 < self.b_v < 1):
            raise ConfigurationError(f"Adam decay rates must lie in (0, 1), got b_m={self.b_m}, b_v={self.b_v}")
        if not self.eps_a > 0:
            raise ConfigurationError(f"eps_a must be > 0, got {self.eps_a}")


@dataclass
class AdamState:
    """First moment m, second moment v, and the number of updates taken so far."""
    m: np.ndarray
    v: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n, dtype=np.float64), np.zeros(n, dtype=np.float64), 0)
