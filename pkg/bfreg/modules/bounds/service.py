"""Generalization-bound diagnostics computed from trained networks."""
import logging
import math
from typing import Iterable, Optional

import numpy as np

from bfreg.exceptions import ConfigurationError
from bfreg.modules.network import NetworkParams
from bfreg.modules.regularization import RegStrategy, RegState, StrategyKind, bifidelity_weights
from bfreg.modules.bounds.models import LayerNormReport, KReport, REFERENCE_K

logger = logging.getLogger(__name__)

K_NAMES = ("K_std_HF", "K_wgt_HF", "K_std_BF", "K_wgt_BF")

# Which constant bounds which strategy
STRATEGY_K = {
    StrategyKind.L1_STANDARD: "K_std_HF",
    StrategyKind.L1_REWEIGHTED_HF: "K_wgt_HF",
    StrategyKind.L1_BIFIDELITY_DIFF: "K_std_BF",
    StrategyKind.L1_BIFIDELITY_WEIGHTED: "K_wgt_BF",
}


def _layer_blocks(params: NetworkParams) -> list[tuple[int, int]]:
    blocks, start = [], 0
    for weights, bias in params.layers:
        stop = start + weights.size + bias.size
        blocks.append((start, stop))
        start = stop
    return blocks


def _as_flat(values, n: int, what: str) -> np.ndarray:
    flat = values.flatten() if isinstance(values, NetworkParams) else np.asarray(values, dtype=np.float64)
    if flat.ndim != 1 or flat.shape[0] != n:
        raise ConfigurationError(f"{what} has length {flat.size}, network has {n} parameters")
    return flat


def layer_l1_norms(params: NetworkParams, theta_lf=None, weights=None) -> LayerNormReport:
    """Per-layer ||θ_j||_1 and, when given, the weighted, difference and low-fidelity sums."""
    theta = params.flatten()
    n = theta.shape[0]
    lf = _as_flat(theta_lf, n, "theta_lf") if theta_lf is not None else None
    if isinstance(weights, RegState):
        weights = weights.current_weights
    w = _as_flat(weights, n, "weights") if weights is not None else None

    report = LayerNormReport(L=[], theta_max=[])
    if w is not None:
        report.L_w = []
    if lf is not None:
        report.L_d, report.L_LF, report.theta_lf_max = [], [], []
    for start, stop in _layer_blocks(params):
        block = np.abs(theta[start:stop])
        report.L.append(float(block.sum()))
        report.theta_max.append(float(block.max()))
        if w is not None:
            report.L_w.append(float(np.sum(w[start:stop] * block)))
        if lf is not None:
            lf_block = lf[start:stop]
            report.L_d.append(float(np.sum(np.abs(theta[start:stop] - lf_block))))
            report.L_LF.append(float(np.sum(np.abs(lf_block))))
            report.theta_lf_max.append(float(np.max(np.abs(lf_block))))
    return report


def _product(factors: Iterable[float]) -> float:
    return float(math.prod(factors))


def k_constants(report: LayerNormReport, eps_w: float, constants: Optional[Iterable[str]] = None) -> KReport:
    """Products over layers of the per-layer factors.

    With ``constants`` unset every constant the report supports is computed;
    naming one the report cannot support is a configuration error.
    """
    requested = set(constants) if constants is not None else None
    if requested is not None and not requested <= set(K_NAMES):
        raise ConfigurationError(f"unknown K constant(s): {sorted(requested - set(K_NAMES))}")

    def wanted(name: str, available: bool, missing: str) -> bool:
        if requested is None:
            return available
        if name in requested and not available:
            raise ConfigurationError(f"{name} needs {missing}")
        return name in requested

    out = KReport()
    if wanted("K_std_HF", True, ""):
        out.K_std_HF = _product(2.0 * l for l in report.L)
    if wanted("K_wgt_HF", report.L_w is not None, "a weight vector"):
        out.K_wgt_HF = _product(2.0 * lw * (tm + eps_w) for lw, tm in zip(report.L_w, report.theta_max))
    if wanted("K_std_BF", report.L_d is not None, "theta_lf"):
        out.K_std_BF = _product(2.0 * (ld + llf) for ld, llf in zip(report.L_d, report.L_LF))
    if wanted("K_wgt_BF", report.L_w is not None and report.theta_lf_max is not None, "theta_lf and a weight vector"):
        out.K_wgt_BF = _product(2.0 * lw * (tm + eps_w) for lw, tm in zip(report.L_w, report.theta_lf_max))
    return out


def full_k_report(params: NetworkParams, theta_lf=None, eps_w: float = 1e-5,
                  hf_weights: RegState | None = None) -> KReport:
    """All four constants with the weights each one is defined with.

    K_wgt_HF uses ``hf_weights`` (the final reweighting state) or, when absent,
    1/(|θ|+ε_w) from the network itself; K_wgt_BF uses the low-fidelity weights.
    """
    theta = params.flatten()
    if hf_weights is None:
        hf_weights = RegState(1.0 / (np.abs(theta) + eps_w))
    hf = k_constants(layer_l1_norms(params, weights=hf_weights), eps_w, ("K_std_HF", "K_wgt_HF"))
    out = KReport(K_std_HF=hf.K_std_HF, K_wgt_HF=hf.K_wgt_HF)
    if theta_lf is not None:
        bf_report = layer_l1_norms(params, theta_lf=theta_lf, weights=bifidelity_weights(theta_lf, eps_w))
        bf = k_constants(bf_report, eps_w, ("K_std_BF", "K_wgt_BF"))
        out.K_std_BF, out.K_wgt_BF = bf.K_std_BF, bf.K_wgt_BF
    return out


def k_report_for_strategy(strategy: RegStrategy, params: NetworkParams,
                          state: RegState | None = None) -> tuple[str, float] | None:
    """The constant bounding ``strategy``'s hypothesis class, or None for unregularized runs."""
    name = STRATEGY_K.get(strategy.kind)
    if name is None:
        return None
    theta_lf = strategy.theta_lf if strategy.is_bifidelity else None
    hf_weights = state if strategy.kind == StrategyKind.L1_REWEIGHTED_HF else None
    report = full_k_report(params, theta_lf, strategy.eps_w, hf_weights)
    return name, getattr(report, name)


def check_k_ordering(values: dict[str, float | None]) -> dict:
    """Checks K_std_BF, K_wgt_BF < K_std_HF < K_wgt_HF; "warn" is not a failure."""
    missing = [name for name in K_NAMES if values.get(name) is None]
    if missing:
        return {"status": "skipped", "missing": missing}
    ok = (
        max(values["K_std_BF"], values["K_wgt_BF"]) < values["K_std_HF"] < values["K_wgt_HF"]
        and all(math.isfinite(values[name]) and values[name] > 0 for name in K_NAMES)
    )
    if not ok:
        logger.warning("K ordering differs from the reference instance: %s", values)
    return {"status": "pass" if ok else "warn", "values": dict(values), "reference": dict(REFERENCE_K)}
