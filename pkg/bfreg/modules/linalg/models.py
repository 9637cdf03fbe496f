"""Linalg value types – Matrix/Vector aliases and the splittable Rng."""
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

# Row-major float64 arrays; shapes are checked by the service functions.
Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]


@dataclass(frozen=True)
class Rng:
    """Seeded random stream identified by (seed, path).

    ``split(i)`` appends ``i`` to the path, so a child stream depends only on
    its address and not on how many draws its parent has made.
    """
    seed: int
    path: tuple[int, ...] = ()
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=tuple(int(p) for p in self.path))
        object.__setattr__(self, "_generator", np.random.Generator(np.random.PCG64(seq)))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def split(self, index: int) -> "Rng":
        if index < 0:
            raise ValueError("split index must be non-negative")
        return Rng(self.seed, self.path + (int(index),))
