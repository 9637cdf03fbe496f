"""Experiment protocol: training, λ selection, replications and the derived reports."""
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from bfreg.config import get_settings
from bfreg.exceptions import ConfigurationError, DivergenceError, InputError, NoShockError
from bfreg.modules.bounds import full_k_report, k_report_for_strategy, check_k_ordering
from bfreg.modules.linalg import Rng, standard_normal_sample
from bfreg.modules.network import (
    ActivationKind, LayerSpec, NetworkParams, backprop, build_autoencoder_spec, build_fnn_specs,
    dump_params, forward_batch, init_params, mse_loss, param_count,
)
from bfreg.modules.network.schemas import ParamDump
from bfreg.modules.optimizer import AdamState, adam_step, sgd_step, total_subgradient
from bfreg.modules.problems import (
    BiFidelityDataset, Split, generate_bifidelity_dataset, nozzle_grid, nozzle_shock_from_field,
)
from bfreg.modules.regularization import (
    RegStrategy, StrategyConfig, StrategyKind, dropout_masks, initial_state, load_theta_lf, penalty,
    strategy_from_config, subgradient, update_reweight_state,
)
from bfreg.modules.regularization.models import REGULARIZED
from bfreg.modules.harness.models import (
    ExperimentReport, ReplicationResult, StrategySummary, TraceRow, TrainConfig, TrainResult,
)
from bfreg.modules.harness.presets import reference_for
from bfreg.modules.harness.schemas import ArchConfig, RunConfig
from bfreg.utils.job_service import JobRunner

logger = logging.getLogger(__name__)

BIFIDELITY_TYPES = (StrategyKind.L1_BIFIDELITY_DIFF, StrategyKind.L1_BIFIDELITY_WEIGHTED)


# ─── Metrics ────────────────────────────────────────────────────

def relative_rmse(y_val, y_pred) -> float:
    """||y_val - y_pred||_2 / ||y_val||_2 over the whole stacked validation set."""
    y_val = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in y_val]
    y_pred = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in y_pred]
    if len(y_val) != len(y_pred):
        raise ConfigurationError(f"{len(y_val)} validation targets but {len(y_pred)} predictions")
    if not y_val:
        raise InputError("validation set is empty")
    for i, (v, p) in enumerate(zip(y_val, y_pred)):
        if v.shape != p.shape:
            raise ConfigurationError(f"sample {i}: target shape {v.shape} differs from prediction {p.shape}")
    truth = np.concatenate(y_val)
    pred = np.concatenate(y_pred)
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise InputError("validation targets have zero norm; relative error is undefined")
    return float(np.linalg.norm(truth - pred) / norm)


def shock_positions(fields: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Shock position of every row; a field with no shock maps to the nearer endpoint."""
    out = np.empty(fields.shape[0])
    for i, row in enumerate(fields):
        try:
            out[i] = nozzle_shock_from_field(row, grid)
        except NoShockError:
            out[i] = grid[-1] if np.mean(row[1:-1]) > 0 else grid[0]
    return out


@dataclass(eq=False)
class Standardizer:
    """Per-column z-score for inputs and targets; disabled columns pass through."""
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @classmethod
    def fit(cls, split: Split, standardize_x: bool = True, standardize_y: bool = True) -> "Standardizer":
        def stats(a: np.ndarray, enabled: bool):
            if not enabled:
                return np.zeros(a.shape[1]), np.ones(a.shape[1])
            std = a.std(axis=0)
            return a.mean(axis=0), np.where(std > 0, std, 1.0)

        x_mean, x_std = stats(split.x, standardize_x)
        y_mean, y_std = stats(split.y, standardize_y)
        return cls(x_mean, x_std, y_mean, y_std)

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_mean) / self.x_std

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_std

    def inverse_y(self, y: np.ndarray) -> np.ndarray:
        return y * self.y_std + self.y_mean

    def transform(self, split: Split) -> Split:
        return Split(self.transform_x(split.x), self.transform_y(split.y), split.inputs)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("x_mean", "x_std", "y_mean", "y_std")}


@dataclass(eq=False)
class Evaluator:
    """Validation error ε_v of a network on raw-unit targets, optionally through the shock QoI."""
    specs: list[LayerSpec]
    x: np.ndarray
    y_true: np.ndarray
    standardizer: Standardizer
    qoi: str = "output"
    grid: Optional[np.ndarray] = None
    _truth: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.qoi == "shock":
            if self.grid is None:
                self.grid = nozzle_grid(self.y_true.shape[1])
            self._truth = shock_positions(self.y_true, self.grid)[:, None]
        else:
            self._truth = self.y_true

    @classmethod
    def from_split(cls, specs: list[LayerSpec], split: Split, standardizer: Standardizer,
                   qoi: str = "output", grid: Optional[np.ndarray] = None) -> "Evaluator":
        return cls(specs, standardizer.transform_x(split.x), split.y, standardizer, qoi, grid)

    def predict(self, params: NetworkParams) -> np.ndarray:
        return self.standardizer.inverse_y(forward_batch(params, self.specs, self.x))

    def __call__(self, params: NetworkParams) -> float:
        pred = self.predict(params)
        if not np.all(np.isfinite(pred)):
            return math.inf
        if self.qoi == "shock":
            pred = shock_positions(pred, self.grid)[:, None]
        return relative_rmse(self._truth, pred)


# ─── Training ───────────────────────────────────────────────────

def _as_evaluator(val_data, specs: list[LayerSpec]) -> Evaluator:
    if isinstance(val_data, Evaluator):
        return val_data
    if isinstance(val_data, Split):
        return Evaluator.from_split(specs, val_data, Standardizer.fit(val_data, False, False))
    raise ConfigurationError("validation data must be a Split or an Evaluator")


def train(config: TrainConfig, train_data: Split, val_data, theta_init: np.ndarray, rng: Rng) -> TrainResult:
    """Minimise J(θ) + penalty(θ) and return the iterate with the smallest ε_v.

    ``train_data`` is in network units; ``val_data`` is an Evaluator (or a raw
    Split scored on outputs). The trace starts with iteration 0 and the first
    minimum wins ties. NaN/Inf raises DivergenceError.
    """
    specs = config.specs
    strategy = config.strategy
    evaluator = _as_evaluator(val_data, specs)
    if len(train_data) == 0:
        raise ConfigurationError("training data is empty")
    theta = np.array(theta_init, dtype=np.float64, copy=True)
    if theta.ndim != 1 or theta.shape[0] != param_count(specs):
        raise ConfigurationError(f"initial parameters have length {theta.size}, network needs {param_count(specs)}")

    x, y = train_data.x, train_data.y
    n_rows = x.shape[0]
    reg_state = initial_state(strategy, theta)
    adam_cfg = config.adam() if config.optimizer == "adam" else None
    adam_state = AdamState.zeros(theta.shape[0])
    hidden = [s.out_dim for s in specs[:-1]]
    batch_rng, dropout_rng = rng.split(0), rng.split(1)
    reweight = strategy.kind == StrategyKind.L1_REWEIGHTED_HF
    use_dropout = strategy.kind == StrategyKind.DROPOUT and strategy.dropout_p > 0

    def evaluate(k: int) -> TraceRow:
        params = NetworkParams.unflatten(theta, specs, copy=False)
        loss = mse_loss(params, specs, (x, y))
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at iteration {k}", iteration=k)
        return TraceRow(k, loss, penalty(strategy, reg_state, theta), evaluator(params))

    row = evaluate(0)
    trace = [row]
    best_eps, best_iter, best_theta = row.eps_v, 0, theta.copy()

    for k in range(1, config.max_iters + 1):
        if reweight:
            reg_state = update_reweight_state(strategy, theta)
        if config.batch_size is not None and config.batch_size < n_rows:
            rows = batch_rng.generator.choice(n_rows, size=config.batch_size, replace=False)
            bx, by = x[rows], y[rows]
        else:
            bx, by = x, y
        masks = dropout_masks(hidden, bx.shape[0], strategy.dropout_p, dropout_rng) if use_dropout else None

        params = NetworkParams.unflatten(theta, specs, copy=False)
        g = total_subgradient(backprop(params, specs, (bx, by), masks), subgradient(strategy, reg_state, theta))
        if adam_cfg is not None:
            theta, adam_state = adam_step(theta, g, adam_cfg, adam_state)
        else:
            theta = sgd_step(theta, g, config.eta)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"parameters became non-finite at iteration {k}", iteration=k)

        if k % config.eval_every == 0 or k == config.max_iters:
            row = evaluate(k)
            trace.append(row)
            if row.eps_v < best_eps:
                best_eps, best_iter, best_theta = row.eps_v, k, theta.copy()
            logger.debug("iter %s loss %.6e penalty %.6e eps_v %.6e", k, row.loss, row.penalty, row.eps_v)

    return TrainResult(
        params=NetworkParams.unflatten(best_theta, specs),
        best_iter=best_iter,
        best_eps_v=best_eps,
        trace=trace,
        final_state=reg_state if reweight else None,
    )


def train_lofi_network(config: TrainConfig, lo_data: Split, standardizer: Standardizer, rng: Rng,
                       holdout: float = 0.2, qoi: str = "output") -> tuple[np.ndarray, TrainResult]:
    """Standard-l1 network on low-fidelity data; the best iterate is picked on a held-out share.

    Returns the flat θ_LF and the training result.
    """
    if len(lo_data) == 0:
        raise ConfigurationError("low-fidelity data is empty")
    if config.strategy.kind != StrategyKind.L1_STANDARD:
        raise ConfigurationError("the low-fidelity network is trained with l1_standard")
    n = len(lo_data)
    order = rng.split(0).generator.permutation(n)
    n_hold = min(n - 1, max(1, int(round(holdout * n)))) if n > 1 else 0
    held, kept = order[:n_hold], order[n_hold:]
    fit_split = lo_data.subset(kept)
    check_split = lo_data.subset(held) if n_hold else lo_data
    grid = nozzle_grid(check_split.y.shape[1]) if qoi == "shock" else None
    evaluator = Evaluator.from_split(config.specs, check_split, standardizer, qoi, grid)
    theta0 = init_params(config.specs, rng.split(1)).flatten()
    result = train(config, standardizer.transform(fit_split), evaluator, theta0, rng.split(2))
    logger.info("Low-fidelity network: holdout eps_v %.4e at iteration %s", result.best_eps_v, result.best_iter)
    return result.theta, result


# ─── Config handling ────────────────────────────────────────────

def _parse_override_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values are JSON literals where they parse."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigurationError(f"override '{item}' has an empty key")
        node = data
        for part in parts[:-1]:
            if isinstance(node, list):
                if not part.isdigit() or int(part) >= len(node):
                    raise ConfigurationError(f"override '{key}': '{part}' is not a valid index")
                node = node[int(part)]
                continue
            node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigurationError(f"override '{key}': '{part}' is not a section")
        last = parts[-1]
        if isinstance(node, list):
            if not last.isdigit() or int(last) >= len(node):
                raise ConfigurationError(f"override '{key}': '{last}' is not a valid index")
            node[int(last)] = _parse_override_value(raw)
        else:
            node[last] = _parse_override_value(raw)
    return data


def _deep_merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def build_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        location = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigurationError(f"invalid run config at '{location}': {err['msg']}") from exc


def load_run_config(path: str | Path | None = None, overrides: Sequence[str] = (),
                    base: dict | None = None) -> RunConfig:
    """Preset ``base`` (if any), then the JSON file, then dotted overrides."""
    data = dict(base or {})
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")
        data = _deep_merge(data, loaded)
    return build_run_config(apply_overrides(data, overrides))


def build_specs(arch: ArchConfig, input_dim: int, output_dim: int) -> tuple[list[LayerSpec], int | None]:
    """Layer list for the run plus the encoder depth when the network is an autoencoder."""
    activation = ActivationKind(arch.activation, arch.alpha)
    output_activation = ActivationKind(arch.output_activation, arch.alpha)
    if arch.input_dim is not None and arch.input_dim != input_dim:
        raise ConfigurationError(f"arch.input_dim={arch.input_dim} but the data has {input_dim} inputs")
    if arch.kind == "autoencoder":
        if input_dim != output_dim:
            raise ConfigurationError("an autoencoder needs targets of the same width as its inputs")
        spec = build_autoencoder_spec(input_dim, arch.encoder, arch.decoder, activation, output_activation)
        return spec.layers(), len(spec.encoder)
    if arch.output_dim is not None and arch.output_dim != output_dim:
        raise ConfigurationError(f"arch.output_dim={arch.output_dim} but the data has {output_dim} outputs")
    return build_fnn_specs(input_dim, arch.hidden, output_dim, activation, output_activation), None


def train_config_for(run: RunConfig, specs: list[LayerSpec], strategy: RegStrategy) -> TrainConfig:
    opt = run.optimizer
    return TrainConfig(specs, strategy, opt.eta, opt.iters, opt.name, opt.batch_size, opt.eval_every,
                       opt.b_m, opt.b_v, opt.eps_a)


def lofi_train_config(run: RunConfig, specs: list[LayerSpec]) -> TrainConfig:
    lofi = run.lofi
    return TrainConfig(specs, RegStrategy.l1_standard(lofi.lam), lofi.eta, lofi.iters, run.optimizer.name,
                       lofi.batch_size, lofi.eval_every, run.optimizer.b_m, run.optimizer.b_v, run.optimizer.eps_a)


# ─── Replication context ────────────────────────────────────────

@dataclass(eq=False)
class ReplicationContext:
    """Everything one replication shares across strategies and λ values."""
    index: int
    rng: Rng
    dataset: BiFidelityDataset
    standardizer: Standardizer
    specs: list[LayerSpec]
    n_encoder_layers: Optional[int]
    train_hi: Split
    evaluator: Evaluator
    theta_lf: Optional[np.ndarray] = None
    lofi_eps_holdout: Optional[float] = None
    lofi_eps_val: Optional[float] = None
    lofi_error: Optional[str] = None

    def lofi_summary(self) -> dict:
        return {
            "replication": self.index,
            "eps_v_holdout": self.lofi_eps_holdout,
            "eps_v_hifi_val": self.lofi_eps_val,
            "error": self.lofi_error,
        }


def interpolate_fields(split: Split, n_grid: int) -> Split:
    """Resample each row (a field on a uniform [0, pi] grid) onto ``n_grid`` points."""
    source = nozzle_grid(split.x.shape[1])
    target = nozzle_grid(n_grid)
    fields = np.stack([np.interp(target, source, row) for row in split.x])
    return Split(fields, fields.copy(), split.inputs)


def _needs_lofi(run: RunConfig) -> bool:
    return any(s.type in BIFIDELITY_TYPES and not s.theta_lf_path for s in run.strategies)


def prepare_replication(run: RunConfig, index: int, root: Rng) -> ReplicationContext:
    """Draw the replication's data and train its low-fidelity network when needed.

    Child streams of the replication: 0 data, 1 low-fidelity net, 3 inits, 4 training noise.
    """
    rng = root.split(index)
    counts = run.counts
    dataset = generate_bifidelity_dataset(
        run.problem, counts.N_l, counts.N_h, counts.N_val, rng.split(0),
        n_elems=run.n_elems, lo_grid=run.lo_grid, hi_grid=run.hi_grid,
        lo_csv=run.lo_csv, hi_csv=run.hi_csv, val_csv=run.val_csv,
    )
    lo = dataset.lo
    if run.problem == "nozzle" and lo.x.shape[1] != dataset.hi.x.shape[1]:
        lo = interpolate_fields(lo, dataset.hi.x.shape[1])
        dataset.lo = lo

    standardizer = Standardizer.fit(dataset.hi, run.standardize_x, run.standardize_y)
    specs, n_enc = build_specs(run.arch, dataset.hi.x.shape[1], dataset.hi.y.shape[1])
    grid = nozzle_grid(dataset.val.y.shape[1]) if run.qoi == "shock" else None
    evaluator = Evaluator.from_split(specs, dataset.val, standardizer, run.qoi, grid)
    ctx = ReplicationContext(index, rng, dataset, standardizer, specs, n_enc,
                             standardizer.transform(dataset.hi), evaluator)

    if _needs_lofi(run):
        if lo.x.shape[1] != dataset.hi.x.shape[1] or lo.y.shape[1] != dataset.hi.y.shape[1]:
            raise ConfigurationError("low- and high-fidelity samples must share dimensions to share a network")
        try:
            theta_lf, result = train_lofi_network(lofi_train_config(run, specs), lo, standardizer,
                                                  rng.split(1), run.lofi.holdout, run.qoi)
        except DivergenceError as exc:
            logger.warning("Replication %s: low-fidelity training diverged: %s", index, exc.detail)
            ctx.lofi_error = exc.detail
        else:
            ctx.theta_lf = theta_lf
            ctx.lofi_eps_holdout = result.best_eps_v
            ctx.lofi_eps_val = evaluator(result.params)
    return ctx


# ─── Per-cell runs ──────────────────────────────────────────────

def histogram_counts(values: np.ndarray, min_exp: int, max_exp: int) -> dict:
    """Decade bins between 10**min_exp and 10**max_exp plus underflow and overflow."""
    values = np.abs(np.asarray(values, dtype=np.float64)).ravel()
    edges = 10.0 ** np.arange(min_exp, max_exp + 1)
    inside = values[(values >= edges[0]) & (values < edges[-1])]
    counts = np.histogram(inside, bins=edges)[0]
    return {
        "edges": edges.tolist(),
        "underflow": int(np.sum(values < edges[0])),
        "counts": counts.astype(int).tolist(),
        "overflow": int(np.sum(values >= edges[-1])),
    }


def parameter_histograms(params: NetworkParams, theta_lf: Optional[np.ndarray] = None) -> dict:
    settings = get_settings()
    lo, hi = settings.HIST_MIN_EXP, settings.HIST_MAX_EXP
    theta = params.flatten()
    hidden = params.layers[:-1]
    out = {"abs_theta": histogram_counts(theta, lo, hi)}
    if hidden:
        out["hidden_weights"] = histogram_counts(np.concatenate([w.ravel() for w, _ in hidden]), lo, hi)
        out["hidden_biases"] = histogram_counts(np.concatenate([b for _, b in hidden]), lo, hi)
    if theta_lf is not None:
        out["abs_theta_minus_lf"] = histogram_counts(theta - theta_lf, lo, hi)
    return out


def sparsity_fraction(theta: np.ndarray, threshold: Optional[float] = None) -> float:
    threshold = get_settings().SPARSITY_THRESHOLD if threshold is None else threshold
    return float(np.mean(np.abs(theta) < threshold))


def _theta_lf_for(ctx: ReplicationContext, strategy_cfg: StrategyConfig) -> Optional[np.ndarray]:
    if strategy_cfg.type not in BIFIDELITY_TYPES:
        return None
    if strategy_cfg.theta_lf_path:
        theta_lf = load_theta_lf(strategy_cfg.theta_lf_path)
        if theta_lf.shape[0] != param_count(ctx.specs):
            raise ConfigurationError(
                f"theta_lf from {strategy_cfg.theta_lf_path} has {theta_lf.shape[0]} entries, "
                f"network has {param_count(ctx.specs)}"
            )
        return theta_lf
    return ctx.theta_lf


def run_cell(run: RunConfig, ctx: ReplicationContext, s_index: int, strategy_cfg: StrategyConfig,
             lam: float) -> tuple[ReplicationResult, Optional[TrainResult]]:
    """Train every initialization for one (strategy, λ, replication) and keep the best."""
    theta_lf = _theta_lf_for(ctx, strategy_cfg)
    label = strategy_cfg.label
    if strategy_cfg.type in BIFIDELITY_TYPES and theta_lf is None:
        logger.error("Replication %s: %s skipped, no low-fidelity parameters", ctx.index, label)
        return ReplicationResult(ctx.index, label, lam, float("nan"), failed=True), None

    strategy = strategy_from_config(strategy_cfg, lam if lam > 0 else None, theta_lf)
    config = train_config_for(run, ctx.specs, strategy)
    best: Optional[TrainResult] = None
    best_init, n_diverged = 0, 0
    for i in range(run.counts.inits):
        init_rng = ctx.rng.split(3).split(i)
        if strategy.is_bifidelity and run.warm_start:
            theta0 = theta_lf.copy()
            if i > 0 and run.warm_start_noise > 0:
                theta0 = theta0 + run.warm_start_noise * standard_normal_sample(init_rng, theta0.shape[0])
        else:
            theta0 = init_params(ctx.specs, init_rng).flatten()
        try:
            result = train(config, ctx.train_hi, ctx.evaluator, theta0, ctx.rng.split(4).split(s_index).split(i))
        except DivergenceError as exc:
            n_diverged += 1
            logger.warning("Replication %s, %s (lambda=%s), init %s diverged: %s",
                           ctx.index, label, lam, i, exc.detail)
            continue
        if best is None or result.best_eps_v < best.best_eps_v:
            best, best_init = result, i

    if best is None:
        logger.error("Replication %s, %s (lambda=%s): every initialization diverged", ctx.index, label, lam)
        return ReplicationResult(ctx.index, label, lam, float("nan"), n_diverged=n_diverged, failed=True), None

    k_report = full_k_report(best.params, theta_lf, strategy.eps_w, best.final_state).to_dict()
    strategy_k = k_report_for_strategy(strategy, best.params, best.final_state)
    result = ReplicationResult(
        replication=ctx.index,
        strategy=label,
        lam=lam,
        eps_v=best.best_eps_v,
        best_iter=best.best_iter,
        init_index=best_init,
        n_diverged=n_diverged,
        k_report=k_report,
        strategy_k=None if strategy_k is None else {"name": strategy_k[0], "value": strategy_k[1]},
        sparsity=sparsity_fraction(best.theta),
        histograms=parameter_histograms(best.params, theta_lf),
    )
    logger.info("Replication %s, %s (lambda=%s): eps_v %.4e at iteration %s (init %s)",
                ctx.index, label, lam, best.best_eps_v, best.best_iter, best_init)
    return result, best


def reconstructions(ctx: ReplicationContext, params: NetworkParams, n: int) -> dict:
    """True and reconstructed validation fields for the first ``n`` samples."""
    n = min(n, len(ctx.dataset.val))
    pred = ctx.evaluator.predict(params)[:n]
    grid = nozzle_grid(ctx.dataset.val.y.shape[1])
    return {"x": grid.tolist(), "true": ctx.dataset.val.y[:n].tolist(), "reconstructed": pred.tolist()}


def replication_job(run: RunConfig, seed: int, path: tuple, index: int, keep_params: bool = False) -> dict:
    """All (strategy, λ) cells of one replication; a module-level function so workers can pickle it.

    With ``keep_params`` the best flat θ of every cell stays on its result.
    """
    ctx = prepare_replication(run, index, Rng(seed, tuple(path)))
    cells: dict[tuple[str, float], ReplicationResult] = {}
    recon: dict[tuple[str, float], dict] = {}
    for s_index, strategy_cfg in enumerate(run.strategies):
        for lam in strategy_cfg.grid():
            result, best = run_cell(run, ctx, s_index, strategy_cfg, lam)
            if keep_params and best is not None:
                result.theta = best.theta
            cells[(strategy_cfg.label, lam)] = result
            if (index == 0 and best is not None and run.arch.kind == "autoencoder"
                    and run.export_reconstructions > 0
                    and strategy_cfg.type == StrategyKind.L1_BIFIDELITY_WEIGHTED):
                recon[(strategy_cfg.label, lam)] = reconstructions(ctx, best.params, run.export_reconstructions)
    out = {"index": index, "lofi": ctx.lofi_summary(), "cells": cells, "reconstructions": recon}
    if keep_params:
        out["specs"], out["n_encoder_layers"], out["theta_lf"] = ctx.specs, ctx.n_encoder_layers, ctx.theta_lf
    return out


# ─── λ selection ────────────────────────────────────────────────

def _lambda_key(lam: float) -> str:
    return repr(float(lam))


def select_lambda(per_lambda: dict[float, list[ReplicationResult]]) -> tuple[Optional[float], dict]:
    """λ with the smallest mean ε_v over successful replications; ties go to the larger λ.

    A λ whose runs all failed is reported but never selected.
    """
    summary = {}
    chosen, chosen_mean = None, math.inf
    for lam in sorted(per_lambda, reverse=True):
        ok = [r.eps_v for r in per_lambda[lam] if not r.failed]
        mean = float(np.mean(ok)) if ok else None
        summary[_lambda_key(lam)] = {
            "lambda": lam,
            "mean_eps_v": mean,
            "std_eps_v": float(np.std(ok)) if ok else None,
            "n_failed": len(per_lambda[lam]) - len(ok),
        }
        if mean is not None and mean < chosen_mean:
            chosen, chosen_mean = lam, mean
    return chosen, summary


def lambda_grid_search(strategy_cfg: StrategyConfig, results_for: Callable[[float], list[ReplicationResult]],
                       ) -> tuple[Optional[float], dict[float, list[ReplicationResult]], dict]:
    """Gather one result per replication for every λ of the strategy's grid and pick λ*.

    ``results_for(λ)`` either trains the cells or looks up cells a replication job
    already trained. Returns λ*, the results per λ and the per-λ summary.
    """
    grid = strategy_cfg.grid()
    if not grid:
        raise ConfigurationError(f"{strategy_cfg.label}: lambda grid is empty")
    per_lambda = {float(lam): list(results_for(float(lam))) for lam in grid}
    chosen, summary = select_lambda(per_lambda)
    logger.info("%s: selected lambda %s", strategy_cfg.label, chosen)
    return chosen, per_lambda, summary


def train_lambda_grid(run: RunConfig, strategy_cfg: StrategyConfig, contexts: Sequence[ReplicationContext],
                      s_index: int = 0) -> tuple[Optional[float], dict[float, list[ReplicationResult]], dict]:
    """Grid search that trains every λ on every prepared replication."""
    return lambda_grid_search(
        strategy_cfg, lambda lam: [run_cell(run, ctx, s_index, strategy_cfg, lam)[0] for ctx in contexts])


# ─── Experiment ─────────────────────────────────────────────────

def _first_of_type(report: ExperimentReport, kind: StrategyKind) -> Optional[StrategySummary]:
    for summary in report.strategies:
        if summary.type == kind.value:
            return summary
    return None


def ratio_checks(report: ExperimentReport, limit: float = 0.5) -> dict:
    """Mean ε_v of the bi-fidelity strategies relative to the unregularized baseline."""
    baseline = _first_of_type(report, StrategyKind.NONE)
    out = {}
    for kind in BIFIDELITY_TYPES:
        summary = _first_of_type(report, kind)
        if summary is None or baseline is None:
            continue
        ratio = summary.mean_eps_v / baseline.mean_eps_v if baseline.mean_eps_v > 0 else float("nan")
        out[summary.label] = {
            "ratio_to_none": ratio,
            "limit": limit,
            "status": "pass" if ratio <= limit else "fail",
        }
    return out


def sparsity_check(report: ExperimentReport) -> dict:
    """Share of near-zero parameters: standard l1 should beat no regularization."""
    baseline = _first_of_type(report, StrategyKind.NONE)
    l1 = _first_of_type(report, StrategyKind.L1_STANDARD)
    if baseline is None or l1 is None:
        return {"status": "skipped"}
    return {
        "threshold": get_settings().SPARSITY_THRESHOLD,
        l1.label: l1.mean_sparsity,
        baseline.label: baseline.mean_sparsity,
        "status": "pass" if l1.mean_sparsity > baseline.mean_sparsity else "fail",
    }


def k_summary(report: ExperimentReport) -> dict:
    """Each l1 strategy's own constant from the first successful replication, with the ordering check."""
    values = {}
    for summary in report.strategies:
        for result in summary.replications:
            if not result.failed and result.strategy_k is not None:
                values[result.strategy_k["name"]] = result.strategy_k["value"]
                break
    return check_k_ordering(values)


def run_replications(run: RunConfig, rng: Rng, jobs: int = 1, replications: Optional[int] = None,
                     keep_params: bool = False) -> ExperimentReport:
    """Every strategy over R replications, λ picked per strategy by mean ε_v.

    ``keep_params`` attaches parameter dumps of replication 0 (selected λ) to ``report.params``.
    """
    n_reps = run.counts.R if replications is None else replications
    if n_reps < 1:
        raise ConfigurationError(f"R must be >= 1, got {n_reps}")
    started = time.perf_counter()
    runner = JobRunner(jobs)
    outputs = runner.run(replication_job, [(run, rng.seed, rng.path, r, keep_params) for r in range(n_reps)])

    summaries = []
    extras: dict = {}
    for strategy_cfg in run.strategies:
        label = strategy_cfg.label
        grid = strategy_cfg.grid()
        chosen, per_lambda, per_lambda_summary = lambda_grid_search(
            strategy_cfg, lambda lam: [out["cells"][(label, lam)] for out in outputs])
        kept = per_lambda[chosen] if chosen is not None else per_lambda[float(grid[0])]
        summaries.append(StrategySummary(
            label=label,
            type=strategy_cfg.type.value,
            lambda_grid=[float(v) for v in grid],
            selected_lambda=None if strategy_cfg.type not in REGULARIZED else chosen,
            per_lambda=per_lambda_summary,
            replications=kept,
        ))
        recon = outputs[0]["reconstructions"].get((label, chosen))
        if recon is not None:
            extras.setdefault("reconstructions", {})[label] = recon
        logger.info("%s: lambda %s, mean eps_v %.4e", label, chosen, summaries[-1].mean_eps_v)

    report = ExperimentReport(
        problem=run.problem,
        seed=rng.seed,
        strategies=summaries,
        config=run.model_dump(mode="json", by_alias=True),
        lofi=[out["lofi"] for out in outputs],
        reference=reference_for(run.problem),
        extras=extras,
    )
    report.checks = {
        "ratio": ratio_checks(report),
        "sparsity": sparsity_check(report),
        "k_ordering": k_summary(report),
    }
    report.runtime = time.perf_counter() - started
    report.timing = runner.timing()
    if keep_params:
        report.params = _parameter_dumps(report, outputs[0])
    return report


def _parameter_dumps(report: ExperimentReport, first: dict) -> dict[str, ParamDump]:
    specs, n_enc = first["specs"], first["n_encoder_layers"]
    dumps = {}
    for summary in report.strategies:
        result = summary.replications[0]
        if result.theta is not None:
            dumps[summary.label] = dump_params(NetworkParams.unflatten(result.theta, specs), specs, n_enc)
    if first["theta_lf"] is not None:
        dumps["theta_lf"] = dump_params(NetworkParams.unflatten(first["theta_lf"], specs), specs, n_enc)
    return dumps


def crossover_study(run: RunConfig, n_h_values: Sequence[int], rng: Rng, jobs: int = 1) -> list[dict]:
    """Repeat the experiment for several high-fidelity sample counts and tabulate mean ε_v."""
    rows = []
    for n_h in n_h_values:
        data = run.model_dump(mode="json", by_alias=True)
        data["counts"]["N_h"] = int(n_h)
        report = run_replications(build_run_config(data), rng, jobs)
        for summary in report.strategies:
            rows.append({
                "N_h": int(n_h),
                "strategy": summary.label,
                "lambda": summary.selected_lambda,
                "mean_eps_v": summary.mean_eps_v,
                "std_eps_v": summary.std_eps_v,
                "n_failed": summary.n_failed,
            })
    return rows


# ─── Flat tables ────────────────────────────────────────────────

def replication_rows(report: ExperimentReport) -> list[dict]:
    """One row per replication x strategy."""
    rows = []
    for summary in report.strategies:
        for r in summary.replications:
            rows.append({
                "strategy": summary.label,
                "replication": r.replication,
                "lambda": summary.selected_lambda,
                "eps_v": None if r.failed else r.eps_v,
                "best_iter": r.best_iter,
                "init_index": r.init_index,
                "sparsity": None if r.failed else r.sparsity,
                "failed": r.failed,
                **{name: r.k_report.get(name) for name in ("K_std_HF", "K_wgt_HF", "K_std_BF", "K_wgt_BF")},
            })
    return rows


def histogram_rows(report: ExperimentReport) -> list[dict]:
    """Histogram counts per strategy, replication and histogram kind, one row per bin."""
    rows = []
    for summary in report.strategies:
        for r in summary.replications:
            for kind, hist in sorted(r.histograms.items()):
                edges = hist["edges"]
                bins = [("underflow", 0.0, edges[0], hist["underflow"])]
                bins += [(f"bin_{j}", edges[j], edges[j + 1], c) for j, c in enumerate(hist["counts"])]
                bins.append(("overflow", edges[-1], None, hist["overflow"]))
                for name, low, high, count in bins:
                    rows.append({"strategy": summary.label, "replication": r.replication, "histogram": kind,
                                 "bin": name, "low": low, "high": high, "count": count})
    return rows
