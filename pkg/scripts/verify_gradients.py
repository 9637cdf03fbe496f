"""Backprop against central differences on random ELU networks."""
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np

from bfreg.modules.linalg import Rng
from bfreg.modules.network import (
    ActivationKind, NetworkParams, backprop, build_fnn_specs, finite_difference_gradient, forward_batch,
    init_params, param_count,
)


def _loss(theta, specs, x, y):
    residual = y - forward_batch(NetworkParams.unflatten(theta, specs), specs, x)
    return np.sum(residual * residual) / x.shape[0]


def _relative_errors(exact, numeric, skip_below=1e-10):
    """|a - b| / max(|a|, |b|), skipping components where both magnitudes are below ``skip_below``."""
    scale = np.maximum(np.abs(exact), np.abs(numeric))
    kept = scale >= skip_below
    return np.abs(exact - numeric)[kept] / scale[kept]


def verify_gradients(n_networks=20, seed=2024):
    specs = build_fnn_specs(4, [20, 20], 1, ActivationKind.elu(), ActivationKind.identity())
    root = Rng(seed)
    worst = 0.0
    for k in range(n_networks):
        stream = root.split(k)
        theta = init_params(specs, stream.split(0)).flatten()
        theta = theta + 0.1 * stream.split(1).generator.standard_normal(param_count(specs))
        x = stream.split(2).generator.uniform(-1.0, 1.0, size=(8, 4))
        y = stream.split(3).generator.standard_normal((8, 1))
        exact = backprop(NetworkParams.unflatten(theta, specs), specs, (x, y))
        numeric = finite_difference_gradient(lambda t: _loss(t, specs, x, y), theta.astype(np.longdouble), h=1e-6)
        numeric = numeric.astype(np.float64)
        rel = _relative_errors(exact, numeric)
        worst = max(worst, float(rel.max(initial=0.0)))
        print(f"network {k:2d}: max relative error {rel.max(initial=0.0):.3e} over {rel.size} components")
    print(f"Worst: {worst:.3e} ({'OK' if worst < 1e-5 else 'FAIL'})")
    return worst < 1e-5


if __name__ == "__main__":
    sys.exit(0 if verify_gradients() else 1)
