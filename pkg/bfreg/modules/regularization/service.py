"""Penalties, subgradients and weight updates for every regularization strategy."""
import logging
from pathlib import Path

import numpy as np

from bfreg.exceptions import ConfigurationError
from bfreg.modules.linalg import Rng
from bfreg.modules.network import load_params
from bfreg.modules.regularization.models import RegStrategy, RegState, StrategyKind, DEFAULT_EPS_W
from bfreg.modules.regularization.schemas import StrategyConfig

logger = logging.getLogger(__name__)


def _check_length(theta: np.ndarray, n: int, what: str) -> None:
    if theta.shape[0] != n:
        raise ConfigurationError(f"{what} has length {n}, parameter vector has length {theta.shape[0]}")


def _check_inputs(strategy: RegStrategy, state: RegState | None, theta: np.ndarray) -> None:
    if strategy.theta_lf is not None and strategy.is_bifidelity:
        _check_length(theta, strategy.theta_lf.shape[0], "theta_lf")
    if strategy.kind in (StrategyKind.L1_REWEIGHTED_HF, StrategyKind.L1_BIFIDELITY_WEIGHTED):
        if state is None:
            raise ConfigurationError(f"{strategy.kind.value} needs a weight state")
        _check_length(theta, state.current_weights.shape[0], "weight state")


def sign_right(values: np.ndarray) -> np.ndarray:
    """sign with s(0) = +1 (right-hand derivative of |.| at the kink)."""
    return np.where(values >= 0, 1.0, -1.0)


# ─── Penalty ────────────────────────────────────────────────────

def penalty(strategy: RegStrategy, state: RegState | None, theta: np.ndarray) -> float:
    _check_inputs(strategy, state, theta)
    kind = strategy.kind
    if kind in (StrategyKind.NONE, StrategyKind.DROPOUT):
        return 0.0
    if kind == StrategyKind.L2:
        return float(strategy.lam * np.linalg.norm(theta))
    if kind == StrategyKind.L1_STANDARD:
        return float(strategy.lam * np.sum(np.abs(theta)))
    if kind == StrategyKind.L1_BIFIDELITY_DIFF:
        return float(strategy.lam * np.sum(np.abs(theta - strategy.theta_lf)))
    return float(strategy.lam * np.sum(state.current_weights * np.abs(theta)))


def subgradient(strategy: RegStrategy, state: RegState | None, theta: np.ndarray) -> np.ndarray:
    _check_inputs(strategy, state, theta)
    kind = strategy.kind
    if kind in (StrategyKind.NONE, StrategyKind.DROPOUT):
        return np.zeros_like(theta)
    if kind == StrategyKind.L2:
        norm = np.linalg.norm(theta)
        if norm == 0:
            return np.zeros_like(theta)
        return strategy.lam * theta / norm
    if kind == StrategyKind.L1_STANDARD:
        return strategy.lam * sign_right(theta)
    if kind == StrategyKind.L1_BIFIDELITY_DIFF:
        return strategy.lam * sign_right(theta - strategy.theta_lf)
    return strategy.lam * state.current_weights * sign_right(theta)


# ─── Weight state ───────────────────────────────────────────────

def update_reweight_state(strategy: RegStrategy, theta_prev: np.ndarray) -> RegState:
    """w_i = 1 / (|θ_prev,i| + ε_w), refreshed from the previous iterate."""
    if strategy.kind != StrategyKind.L1_REWEIGHTED_HF:
        raise ConfigurationError(f"reweighting applies to l1_reweighted_hf, not {strategy.kind.value}")
    if not np.all(np.isfinite(theta_prev)):
        raise ConfigurationError("reweighting needs a finite previous iterate")
    return RegState(1.0 / (np.abs(theta_prev) + strategy.eps_w))


def bifidelity_weights(theta_lf: np.ndarray, eps_w: float = DEFAULT_EPS_W) -> RegState:
    """Fixed weights 1 / (|θ_LF,i| + ε_w); ε_w = 0 is allowed when no θ_LF entry is zero."""
    theta_lf = np.asarray(theta_lf, dtype=np.float64)
    if not np.all(np.isfinite(theta_lf)):
        raise ConfigurationError("theta_lf must be finite")
    if eps_w < 0 or (eps_w == 0 and np.any(theta_lf == 0)):
        raise ConfigurationError(f"eps_w must be positive, got {eps_w}")
    return RegState(1.0 / (np.abs(theta_lf) + eps_w))


def initial_state(strategy: RegStrategy, theta0: np.ndarray) -> RegState:
    """State an optimization run starts from; ones for the unweighted strategies."""
    if strategy.kind == StrategyKind.L1_REWEIGHTED_HF:
        return update_reweight_state(strategy, theta0)
    if strategy.kind == StrategyKind.L1_BIFIDELITY_WEIGHTED:
        _check_length(theta0, strategy.theta_lf.shape[0], "theta_lf")
        return bifidelity_weights(strategy.theta_lf, strategy.eps_w)
    if strategy.is_bifidelity:
        _check_length(theta0, strategy.theta_lf.shape[0], "theta_lf")
    return RegState(np.ones_like(theta0, dtype=np.float64))


# ─── Dropout ────────────────────────────────────────────────────

def apply_dropout(layer_output: np.ndarray, p: float, rng: Rng, training: bool) -> np.ndarray:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p)."""
    if not 0 <= p < 1:
        raise ConfigurationError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return layer_output
    return layer_output * dropout_mask(layer_output.shape, p, rng)


def dropout_mask(shape, p: float, rng: Rng) -> np.ndarray:
    keep = rng.generator.random(size=shape) >= p
    return keep.astype(np.float64) / (1.0 - p)


def dropout_masks(hidden_widths: list[int], batch_rows: int, p: float, rng: Rng) -> list[np.ndarray | None]:
    """One scaled mask per hidden layer for a batch; the output layer gets none."""
    if p == 0:
        return [None] * (len(hidden_widths) + 1)
    masks: list[np.ndarray | None] = [dropout_mask((batch_rows, w), p, rng) for w in hidden_widths]
    masks.append(None)
    return masks


# ─── Config resolution ──────────────────────────────────────────

def load_theta_lf(path: str | Path) -> np.ndarray:
    """θ_LF from a parameter dump JSON file."""
    params, _ = load_params(path)
    return params.flatten()


def strategy_from_config(config: StrategyConfig, lam: float | None = None,
                         theta_lf: np.ndarray | None = None) -> RegStrategy:
    """Resolve a config entry into a RegStrategy; ``lam`` overrides the configured λ."""
    lam = config.lam if lam is None else lam
    kind = config.type
    if kind in (StrategyKind.L1_BIFIDELITY_DIFF, StrategyKind.L1_BIFIDELITY_WEIGHTED) and theta_lf is None:
        if not config.theta_lf_path:
            raise ConfigurationError(f"strategy '{config.label}' needs theta_lf (theta_lf_path or a trained low-fidelity net)")
        theta_lf = load_theta_lf(config.theta_lf_path)
    if kind == StrategyKind.NONE:
        return RegStrategy.none()
    if kind == StrategyKind.DROPOUT:
        return RegStrategy.dropout(config.dropout_p)
    if lam is None:
        raise ConfigurationError(f"strategy '{config.label}' needs a lambda")
    if kind == StrategyKind.L2:
        return RegStrategy.l2(lam)
    if kind == StrategyKind.L1_STANDARD:
        return RegStrategy.l1_standard(lam)
    if kind == StrategyKind.L1_REWEIGHTED_HF:
        return RegStrategy.l1_reweighted_hf(lam, config.eps_w)
    if kind == StrategyKind.L1_BIFIDELITY_DIFF:
        return RegStrategy.l1_bifidelity_diff(lam, theta_lf)
    return RegStrategy.l1_bifidelity_weighted(lam, theta_lf, config.eps_w)
