"""Shared fixtures: seeded streams and small networks."""
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest

from bfreg.modules.linalg import Rng
from bfreg.modules.network import ActivationKind, build_fnn_specs, init_params


@pytest.fixture
def rng():
    return Rng(7)


@pytest.fixture
def elu_specs():
    """3 inputs, two hidden ELU layers of 5, one linear output."""
    return build_fnn_specs(3, [5, 5], 1, ActivationKind.elu(), ActivationKind.identity())


@pytest.fixture
def elu_params(elu_specs, rng):
    return init_params(elu_specs, rng.split(0))


@pytest.fixture
def toy_batch(rng):
    """Noise-free linear targets y = x @ [1, -2, 0.5]."""
    x = rng.split(1).generator.uniform(-1.0, 1.0, size=(16, 3))
    y = x @ np.array([[1.0], [-2.0], [0.5]])
    return x, y
