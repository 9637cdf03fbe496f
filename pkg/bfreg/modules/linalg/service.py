"""Dense vector/matrix helpers and random sampling on top of numpy."""
import numpy as np

from bfreg.exceptions import ConfigurationError
from bfreg.modules.linalg.models import Matrix, Vector, Rng


def matrix(rows, cols: int | None = None) -> Matrix:
    """Build a float64 matrix from nested rows (or a flat row-major list plus ``cols``)."""
    data = np.asarray(rows, dtype=np.float64)
    if cols is not None:
        if data.ndim != 1 or data.size % cols != 0:
            raise ConfigurationError(f"row-major data of length {data.size} does not fit {cols} columns")
        data = data.reshape(-1, cols)
    if data.ndim != 2:
        raise ConfigurationError(f"matrix needs 2 dimensions, got {data.ndim}")
    if not np.all(np.isfinite(data)):
        raise ConfigurationError("matrix entries must be finite")
    return data


def vector(values) -> Vector:
    data = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(data)):
        raise ConfigurationError("vector entries must be finite")
    return data


def identity(n: int) -> Matrix:
    return np.eye(n, dtype=np.float64)


def zeros(rows: int, cols: int | None = None) -> Matrix | Vector:
    if cols is None:
        return np.zeros(rows, dtype=np.float64)
    return np.zeros((rows, cols), dtype=np.float64)


def matvec(m: Matrix, v: Vector) -> Vector:
    if m.ndim != 2 or v.ndim != 1:
        raise ConfigurationError(f"matvec expects a matrix and a vector, got shapes {m.shape} and {v.shape}")
    if m.shape[1] != v.shape[0]:
        raise ConfigurationError(f"dimension mismatch: matrix has {m.shape[1]} columns, vector has length {v.shape[0]}")
    return m @ v


def uniform_sample(rng: Rng, a: float, b: float, n: int) -> Vector:
    """n independent draws from U[a, b)."""
    if not a < b:
        raise ConfigurationError(f"uniform_sample needs a < b, got a={a}, b={b}")
    if n < 0:
        raise ConfigurationError("sample count must be non-negative")
    return rng.generator.uniform(a, b, size=n)


def standard_normal_sample(rng: Rng, n: int) -> Vector:
    if n < 1:
        raise ConfigurationError("standard_normal_sample needs n >= 1")
    return rng.generator.standard_normal(size=n)
