"""Harness models – training configuration, traces and experiment results."""
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from bfreg.exceptions import ConfigurationError
from bfreg.modules.network import LayerSpec, NetworkParams
from bfreg.modules.optimizer import AdamConfig
from bfreg.modules.regularization import RegStrategy, RegState


@dataclass(eq=False)
class TrainConfig:
    specs: list[LayerSpec]
    strategy: RegStrategy
    eta: float
    max_iters: int
    optimizer: Literal["adam", "sgd"] = "adam"
    # None trains on the full batch every iteration
    batch_size: Optional[int] = None
    eval_every: int = 1
    b_m: float = 0.9
    b_v: float = 0.999
    eps_a: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.eval_every < 1:
            raise ConfigurationError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer '{self.optimizer}'")
        if not self.eta > 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.eta}")

    def adam(self) -> AdamConfig:
        return AdamConfig(self.eta, self.b_m, self.b_v, self.eps_a)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    loss: float
    penalty: float
    eps_v: float


@dataclass(eq=False)
class TrainResult:
    params: NetworkParams
    best_iter: int
    best_eps_v: float
    trace: list[TraceRow]
    final_state: RegState | None = None

    @property
    def theta(self) -> np.ndarray:
        return self.params.flatten()


@dataclass(eq=False)
class ReplicationResult:
    """Best-of-initializations outcome of one (strategy, λ, replication) cell."""
    replication: int
    strategy: str
    lam: float
    eps_v: float
    best_iter: int = 0
    init_index: int = 0
    n_diverged: int = 0
    failed: bool = False
    k_report: dict = field(default_factory=dict)
    strategy_k: Optional[dict] = None
    sparsity: float = float("nan")
    histograms: dict = field(default_factory=dict)
    theta: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.failed and not self.eps_v >= 0:
            raise ConfigurationError(f"eps_v must be >= 0, got {self.eps_v}")

    def to_dict(self) -> dict:
        return {
            "replication": self.replication,
            "strategy": self.strategy,
            "lambda": self.lam,
            "eps_v": None if self.failed else self.eps_v,
            "best_iter": self.best_iter,
            "init_index": self.init_index,
            "n_diverged": self.n_diverged,
            "failed": self.failed,
            "k_constants": self.k_report,
            "strategy_k": self.strategy_k,
            "sparsity": None if self.failed else self.sparsity,
            "histograms": self.histograms,
        }


@dataclass(eq=False)
class StrategySummary:
    label: str
    type: str
    lambda_grid: list[float]
    selected_lambda: Optional[float]
    per_lambda: dict
    replications: list[ReplicationResult]

    @property
    def successes(self) -> list[ReplicationResult]:
        return [r for r in self.replications if not r.failed]

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.replications)

    @property
    def mean_eps_v(self) -> float:
        ok = self.successes
        return float(np.mean([r.eps_v for r in ok])) if ok else float("nan")

    @property
    def std_eps_v(self) -> float:
        """Population standard deviation (ddof = 0)."""
        ok = self.successes
        return float(np.std([r.eps_v for r in ok])) if ok else float("nan")

    @property
    def mean_sparsity(self) -> float:
        ok = self.successes
        return float(np.mean([r.sparsity for r in ok])) if ok else float("nan")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "type": self.type,
            "lambda_grid": self.lambda_grid,
            "selected_lambda": self.selected_lambda,
            "per_lambda": self.per_lambda,
            "mean_eps_v": self.mean_eps_v,
            "std_eps_v": self.std_eps_v,
            "n_failed": self.n_failed,
            "mean_sparsity": self.mean_sparsity,
            "replications": [r.to_dict() for r in self.replications],
        }


@dataclass(eq=False)
class ExperimentReport:
    problem: str
    seed: int
    strategies: list[StrategySummary]
    config: dict
    lofi: list[dict] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    # Wall-clock data; written to the timing sidecar, never to the report
    runtime: float = 0.0
    timing: list = field(default_factory=list)
    # Parameter dumps by strategy label (plus "theta_lf"), filled on request
    params: dict = field(default_factory=dict)

    def strategy(self, label: str) -> StrategySummary:
        for summary in self.strategies:
            if summary.label == label:
                return summary
        raise KeyError(label)

    @property
    def all_failed(self) -> bool:
        return all(r.failed for s in self.strategies for r in s.replications)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "seed": self.seed,
            "config": self.config,
            "strategies": {s.label: s.to_dict() for s in self.strategies},
            "table": [
                {"strategy": s.label, "lambda": s.selected_lambda, "mean_eps_v": s.mean_eps_v,
                 "std_eps_v": s.std_eps_v, "n_failed": s.n_failed}
                for s in self.strategies
            ],
            "lofi": self.lofi,
            "checks": self.checks,
            "reference": self.reference,
            "extras": self.extras,
        }
