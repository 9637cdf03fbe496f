"""Compare the closed-form nozzle fields with time-marched steady states."""
import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np

from bfreg.modules.problems import (
    march_burgers, nozzle_field, nozzle_grid, nozzle_shock_from_field, nozzle_shock_position,
)

COARSE = 52


def verify_burgers_oracle(deltas=(-0.5, 0.3, 0.9)):
    coarse_cell = math.pi / (COARSE - 1)
    x = nozzle_grid(COARSE)
    ok = True
    for delta in deltas:
        result = march_burgers(delta, n_cells=4 * (COARSE - 1))
        exact = nozzle_shock_position(delta)
        marched = nozzle_shock_from_field(result.u, result.x)
        on_grid = np.interp(x, np.concatenate([[0.0], result.x, [math.pi]]),
                            np.concatenate([[0.0], result.u, [0.0]]))
        away = np.abs(x - exact) > 2 * coarse_cell
        field_error = float(np.max(np.abs(on_grid[away] - nozzle_field(delta, COARSE)[away])))
        passed = result.converged and abs(marched - exact) <= coarse_cell and field_error < 1e-3
        ok = ok and passed
        print(f"delta={delta:+.2f}  steps={result.steps:6d}  residual={result.residual:.2e}  "
              f"X_s exact={exact:.4f} marched={marched:.4f}  field error={field_error:.2e}  "
              f"{'OK' if passed else 'FAIL'}")
    return ok


if __name__ == "__main__":
    sys.exit(0 if verify_burgers_oracle() else 1)
