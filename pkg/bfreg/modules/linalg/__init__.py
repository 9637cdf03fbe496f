from bfreg.modules.linalg.models import Matrix, Vector, Rng
from bfreg.modules.linalg.service import (
    matrix, vector, identity, zeros, matvec, uniform_sample, standard_normal_sample,
)

__all__ = [
    "Matrix", "Vector", "Rng", "matrix", "vector", "identity", "zeros", "matvec",
    "uniform_sample", "standard_normal_sample",
]
