"""Problem models – beam geometry, per-sample records and bi-fidelity datasets."""
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from bfreg.exceptions import ConfigurationError, InputError

ProblemTag = Literal["beam", "nozzle", "tabular"]

# Input units to SI: load kN/m, flange moduli MPa, web modulus kPa
UNITS = {
    "q": {"unit": "kN/m", "to_si": 1e3},
    "E1": {"unit": "MPa", "to_si": 1e6},
    "E2": {"unit": "MPa", "to_si": 1e6},
    "E3": {"unit": "kPa", "to_si": 1e3},
    "tip_deflection": {"unit": "m", "to_si": 1.0},
}

# Uniform input ranges in the units above
BEAM_RANGES = {
    "q": (9.0, 11.0),
    "E1": (0.9, 1.1),
    "E2": (0.9, 1.1),
    "E3": (9.0, 11.0),
}

NOZZLE_LO_GRID = 52
NOZZLE_HI_GRID = 1048


@dataclass(frozen=True)
class BeamGeometry:
    """Cantilever with a three-layer section; holes are cut through the web."""
    length: float = 50.0
    width: float = 1.0
    h1: float = 0.1   # top flange (E1)
    h2: float = 0.1   # bottom flange (E2)
    h3: float = 5.0   # web (E3)
    hole_radius: float = 1.5
    n_holes: int = 5

    def __post_init__(self):
        if min(self.length, self.width, self.h1, self.h2, self.h3) <= 0:
            raise ConfigurationError("beam dimensions must be positive")
        if self.hole_radius < 0 or 2 * self.hole_radius >= self.h3:
            raise ConfigurationError(f"hole radius {self.hole_radius} does not fit in a web of height {self.h3}")
        if self.n_holes < 0 or 2 * self.hole_radius * self.n_holes > self.length:
            raise ConfigurationError(f"{self.n_holes} holes of radius {self.hole_radius} do not fit along the span")

    @property
    def web_centre(self) -> float:
        return self.h2 + self.h3 / 2

    @property
    def hole_centres(self) -> np.ndarray:
        """Hole centres sit in the middle of equal-width intervals along the span."""
        pitch = self.length / self.n_holes if self.n_holes else 0.0
        return (np.arange(self.n_holes) + 0.5) * pitch


@dataclass(frozen=True)
class BeamSample:
    q: float
    E1: float
    E2: float
    E3: float
    tip_deflection: float

    def __post_init__(self):
        for name, (low, high) in BEAM_RANGES.items():
            value = getattr(self, name)
            if not low <= value <= high:
                raise InputError(f"{name}={value} outside its range [{low}, {high}]")

    @property
    def inputs(self) -> tuple[float, float, float, float]:
        return self.q, self.E1, self.E2, self.E3


@dataclass(frozen=True, eq=False)
class NozzleSample:
    xi: float
    delta: float
    field: np.ndarray
    shock_x: float


@dataclass(eq=False)
class Split:
    """Rows of ``x`` and ``y`` are samples; ``inputs`` holds the raw random inputs when known."""
    x: np.ndarray
    y: np.ndarray
    inputs: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=np.float64))
        if self.x.shape[0] != self.y.shape[0]:
            raise ConfigurationError(f"split has {self.x.shape[0]} inputs but {self.y.shape[0]} targets")

    def __len__(self) -> int:
        return self.x.shape[0]

    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.x, self.y))

    def subset(self, rows) -> "Split":
        inputs = None if self.inputs is None else self.inputs[rows]
        return Split(self.x[rows], self.y[rows], inputs)


@dataclass(eq=False)
class BiFidelityDataset:
    lo: Split
    hi: Split
    val: Split
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.hi.x.shape[1] != self.val.x.shape[1] or self.hi.y.shape[1] != self.val.y.shape[1]:
            raise ConfigurationError("high-fidelity training and validation splits differ in dimension")

    @property
    def problem(self) -> str:
        return self.meta.get("problem", "tabular")
