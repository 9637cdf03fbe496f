"""Parameter update rules: stochastic subgradient descent and Adam."""
import numpy as np

from bfreg.exceptions import ConfigurationError
from bfreg.modules.optimizer.models import AdamConfig, AdamState


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ConfigurationError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")


def sgd_step(theta: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
    _check_same_length(theta, g)
    if not eta > 0:
        raise ConfigurationError(f"step size must be > 0, got {eta}")
    return theta - eta * g


def adam_step(theta: np.ndarray, g: np.ndarray, cfg: AdamConfig,
              state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One Adam update; returns new parameters and a new state, inputs untouched.

    The divisor is sqrt(v_hat) + eps_a and k counts from 1 at the first update.
    """
    _check_same_length(theta, g)
    _check_same_length(state.m, g)
    k = state.k + 1
    m = cfg.b_m * state.m + (1.0 - cfg.b_m) * g
    v = cfg.b_v * state.v + (1.0 - cfg.b_v) * g * g
    m_hat = m / (1.0 - cfg.b_m ** k)
    v_hat = v / (1.0 - cfg.b_v ** k)
    theta_new = theta - cfg.eta * m_hat / (np.sqrt(v_hat) + cfg.eps_a)
    return theta_new, AdamState(m, v, k)


def bias_corrected_moments(cfg: AdamConfig, state: AdamState) -> tuple[np.ndarray, np.ndarray]:
    if state.k == 0:
        return np.zeros_like(state.m), np.zeros_like(state.v)
    return state.m / (1.0 - cfg.b_m ** state.k), state.v / (1.0 - cfg.b_v ** state.k)


def total_subgradient(loss_grad: np.ndarray, reg_subgrad: np.ndarray) -> np.ndarray:
    _check_same_length(loss_grad, reg_subgrad)
    return loss_grad + reg_subgrad
