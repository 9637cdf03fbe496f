"""Dual-throat nozzle model: steady Burgers fields with a parameter-dependent shock."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from bfreg.exceptions import ConfigurationError, NoShockError
from bfreg.modules.linalg import Rng, standard_normal_sample
from bfreg.modules.problems.models import NozzleSample

logger = logging.getLogger(__name__)

MIN_GRID = 8


def nozzle_grid(n_grid: int) -> np.ndarray:
    if n_grid < MIN_GRID:
        raise ConfigurationError(f"nozzle grid needs at least {MIN_GRID} points, got {n_grid}")
    return np.linspace(0.0, math.pi, n_grid)


def nozzle_delta(xi: float) -> float:
    """(-1 + sqrt(1 + 4 xi^2)) / (2 xi), written without the cancellation; 0 at xi = 0."""
    if not math.isfinite(xi):
        raise ConfigurationError(f"xi must be finite, got {xi}")
    return 2.0 * xi / (1.0 + math.sqrt(1.0 + 4.0 * xi * xi))


def nozzle_shock_position(delta: float) -> float:
    if not abs(delta) < 1:
        raise NoShockError(f"no shock for |delta| >= 1 (delta={delta})")
    base = math.asin(math.sqrt(1.0 - delta * delta))
    return base if delta <= 0 else math.pi - base


def nozzle_field(delta: float, n_grid: int) -> np.ndarray:
    """Steady state sampled on ``n_grid`` points over [0, pi]; grid points at X_s take sin x."""
    x = nozzle_grid(n_grid)
    shock = nozzle_shock_position(delta)
    u = np.where(x <= shock, np.sin(x), -np.sin(x))
    u[0] = 0.0
    u[-1] = 0.0
    return u


def nozzle_shock_from_field(field: np.ndarray, grid: np.ndarray | None = None) -> float:
    """Zero crossing of the shock, linearly interpolated between its two interior samples.

    With several positive-to-nonpositive transitions (noisy reconstructions) the
    one with the largest drop is the shock.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 1 or field.shape[0] < 3:
        raise ConfigurationError("field needs at least three samples")
    x = nozzle_grid(field.shape[0]) if grid is None else np.asarray(grid, dtype=np.float64)
    if x.shape != field.shape:
        raise ConfigurationError(f"grid has {x.size} points, field has {field.size}")

    interior = field[1:-1]
    left, right = interior[:-1], interior[1:]
    transitions = np.nonzero((left > 0) & (right <= 0))[0]
    if transitions.size == 0:
        raise NoShockError("field has no positive-to-nonpositive transition")
    k = transitions[np.argmax(left[transitions] - right[transitions])]
    i = k + 1
    f0, f1 = field[i], field[i + 1]
    return float(x[i] + (x[i + 1] - x[i]) * f0 / (f0 - f1))


def nozzle_samples(rng: Rng, n: int, n_grid: int) -> list[NozzleSample]:
    xis = standard_normal_sample(rng, n)
    samples = []
    for xi in xis:
        delta = nozzle_delta(float(xi))
        samples.append(NozzleSample(float(xi), delta, nozzle_field(delta, n_grid), nozzle_shock_position(delta)))
    return samples


# ─── Time-marching oracle ───────────────────────────────────────

@dataclass(eq=False)
class MarchResult:
    x: np.ndarray
    u: np.ndarray
    residual: float
    steps: int
    converged: bool


def _godunov_flux(u_left: np.ndarray, u_right: np.ndarray) -> np.ndarray:
    """Exact Riemann flux of u^2/2."""
    return 0.5 * np.maximum(np.maximum(u_left, 0.0) ** 2, np.minimum(u_right, 0.0) ** 2)


def march_burgers(delta: float, n_cells: int, tol: float = 1e-10, max_steps: int = 400_000,
                  cfl: float = 0.9) -> MarchResult:
    """March u_t + (u^2/2)_x = (sin^2 x / 2)_x from u = delta sin x to steady state.

    First-order Godunov finite volume on ``n_cells`` cells over [0, pi] with
    zero flux through both walls, where u = 0. The source in each cell is the same
    upwind flux difference taken on the reference states sign(u_i) sin(x_i), so
    u_i = +-sin(x_i) at the cell centres is an exact discrete steady state and
    the integral of u is conserved. Stops when max|du|/dt < tol.
    """
    if n_cells < MIN_GRID:
        raise ConfigurationError(f"march_burgers needs at least {MIN_GRID} cells, got {n_cells}")
    if not 0 < cfl <= 1:
        raise ConfigurationError(f"cfl must be in (0, 1], got {cfl}")
    h = math.pi / n_cells
    centres = (np.arange(n_cells) + 0.5) * h
    sines = np.sin(centres)

    def face_fluxes(values: np.ndarray) -> np.ndarray:
        return np.concatenate([[0.0], _godunov_flux(values[:-1], values[1:]), [0.0]])

    u = delta * sines
    residual = math.inf
    step = 0
    while step < max_steps:
        reference = np.where(u >= 0.0, sines, -sines)
        rate = np.diff(face_fluxes(reference) - face_fluxes(u)) / h
        dt = cfl * h / max(1.0, float(np.max(np.abs(u))))
        u = u + dt * rate
        step += 1
        residual = float(np.max(np.abs(rate)))
        if residual < tol:
            break
    converged = residual < tol
    if not converged:
        logger.warning("Burgers march stopped at %s steps with residual %.3e", step, residual)
    return MarchResult(centres, u, residual, step, converged)
