"""Bounds models – per-layer norm bookkeeping and the four K constants."""
from dataclasses import dataclass, asdict
from typing import Optional

# Single-instance values reported for the trained composite-beam networks.
REFERENCE_K = {
    "K_std_HF": 535.36,
    "K_wgt_HF": 2.15e5,
    "K_std_BF": 33.92,
    "K_wgt_BF": 32.72,
}


@dataclass
class LayerNormReport:
    """Per-layer l1 sums; every list is indexed by layer, weights and bias together."""
    L: list[float]
    theta_max: list[float]
    L_w: Optional[list[float]] = None
    L_d: Optional[list[float]] = None
    L_LF: Optional[list[float]] = None
    theta_lf_max: Optional[list[float]] = None

    @property
    def n_layers(self) -> int:
        return len(self.L)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class KReport:
    """Right-hand sides of the generalization-bound constants (upper-bound forms)."""
    K_std_HF: Optional[float] = None
    K_wgt_HF: Optional[float] = None
    K_std_BF: Optional[float] = None
    K_wgt_BF: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)
