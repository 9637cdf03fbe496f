"""Command-line entry point."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from bfreg import __version__
from bfreg.config import get_settings
from bfreg.exceptions import BfregError, ConfigurationError
from bfreg.modules.bounds import REFERENCE_K, check_k_ordering, full_k_report, layer_l1_norms
from bfreg.modules.harness import (
    ExperimentReport, crossover_study, histogram_rows, load_run_config, preset, replication_rows,
    run_replications,
)
from bfreg.modules.linalg import Rng
from bfreg.modules.network import load_params
from bfreg.modules.problems import generate_bifidelity_dataset, write_dataset_bundle, write_dataset_csv
from bfreg.modules.regularization import bifidelity_weights
from bfreg.utils.export_service import write_csv, write_json, write_report_tables, write_timing_sidecar
from bfreg.utils.logging_service import configure_logging

logger = logging.getLogger(__name__)

DIVERGED_EXIT = 2


def _build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME, description="Bi-fidelity l1-regularized training of surrogate networks."
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="stderr log level")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p: argparse.ArgumentParser, needs_config: bool = False) -> None:
        p.add_argument("--config", required=needs_config, help="run config JSON file")
        p.add_argument("--out", default=settings.OUTPUT_DIR, help="output directory")
        p.add_argument("--seed", type=int, help="root seed of every random stream")
        p.add_argument("--jobs", type=int, default=settings.JOBS, help="parallel replication workers")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, e.g. optimizer.eta=1e-4 (repeatable)")
        p.add_argument("--xlsx", action="store_true", help="also write summary.xlsx")

    gen = sub.add_parser("generate-data", help="draw a bi-fidelity dataset and write it as CSV")
    gen.add_argument("problem", choices=["beam", "nozzle", "tabular"])
    gen.add_argument("--n-lo", type=int, required=True)
    gen.add_argument("--n-hi", type=int, required=True)
    gen.add_argument("--n-val", type=int, required=True)
    gen.add_argument("--n-elems", type=int, default=200, help="beam finite elements")
    gen.add_argument("--lo-grid", type=int, default=52, help="nozzle low-fidelity grid points")
    gen.add_argument("--hi-grid", type=int, default=1048, help="nozzle high-fidelity grid points")
    gen.add_argument("--lo-csv")
    gen.add_argument("--hi-csv")
    gen.add_argument("--val-csv")
    gen.add_argument("--out", default=settings.OUTPUT_DIR)
    gen.add_argument("--seed", type=int)

    common(sub.add_parser("train", help="one replication of every configured strategy; saves parameters"),
           needs_config=True)
    common(sub.add_parser("sweep", help="lambda grid search over R replications"), needs_config=True)

    rep = sub.add_parser("reproduce", help="run a built-in study preset")
    rep.add_argument("problem", choices=["beam", "nozzle"])
    rep.add_argument("--scale", choices=["desk", "full"], default="desk")
    common(rep)

    cross = sub.add_parser("crossover", help="repeat a preset study for several high-fidelity counts")
    cross.add_argument("problem", choices=["beam", "nozzle"])
    cross.add_argument("--scale", choices=["desk", "full"], default="desk")
    cross.add_argument("--n-h", type=int, nargs="+", default=[3, 10, 50])
    common(cross)

    bounds = sub.add_parser("bounds-report", help="K constants of a saved network")
    bounds.add_argument("--params", required=True, help="parameter dump JSON")
    bounds.add_argument("--theta-lf", help="low-fidelity parameter dump JSON")
    bounds.add_argument("--eps-w", type=float, default=settings.DEFAULT_EPS_W)
    bounds.add_argument("--out", default=settings.OUTPUT_DIR)

    sub.add_parser("version", help="print the version")
    return parser


def _resolve_seed(cli_seed: Optional[int], config_seed: Optional[int], command: str) -> int:
    seed = cli_seed if cli_seed is not None else config_seed
    if seed is None:
        raise ConfigurationError(f"{command} needs a seed (--seed or 'seed' in the config)")
    return seed


def _write_report(report: ExperimentReport, out_dir: Path, xlsx: bool) -> Path:
    payload = report.to_dict()
    path = write_json(out_dir / "report.json", payload)
    write_timing_sidecar(path, {"runtime_seconds": report.runtime, "jobs": report.timing})
    write_report_tables(out_dir, payload["table"], replication_rows(report), histogram_rows(report), xlsx)
    for strategy, status in report.checks.get("ratio", {}).items():
        logger.info("ratio check %s: %s", strategy, status["status"])
    return path


def _experiment(args, base: Optional[dict], replications: Optional[int] = None,
                keep_params: bool = False) -> tuple[Path, ExperimentReport]:
    run = load_run_config(args.config, args.overrides, base)
    seed = _resolve_seed(args.seed, run.seed, args.command)
    run = run.model_copy(update={"seed": seed})
    out_dir = Path(args.out)
    report = run_replications(run, Rng(seed), args.jobs, replications, keep_params)
    for label, dump in report.params.items():
        write_json(out_dir / f"params_{label}.json", dump.model_dump())
    return _write_report(report, out_dir, args.xlsx), report


def _cmd_generate(args) -> int:
    seed = args.seed
    if seed is None and args.problem != "tabular":
        raise ConfigurationError("generate-data needs --seed")
    dataset = generate_bifidelity_dataset(
        args.problem, args.n_lo, args.n_hi, args.n_val, Rng(seed or 0),
        n_elems=args.n_elems, lo_grid=args.lo_grid, hi_grid=args.hi_grid,
        lo_csv=args.lo_csv, hi_csv=args.hi_csv, val_csv=args.val_csv,
    )
    out_dir = Path(args.out)
    write_dataset_csv(dataset, out_dir)
    print(write_dataset_bundle(dataset, out_dir / "dataset.json"))
    return 0


def _cmd_bounds(args) -> int:
    params, specs = load_params(args.params)
    theta_lf = None
    if args.theta_lf:
        lf_params, lf_specs = load_params(args.theta_lf)
        if lf_specs != specs:
            raise ConfigurationError("low-fidelity parameters belong to a different architecture")
        theta_lf = lf_params.flatten()
    report = full_k_report(params, theta_lf, args.eps_w)
    weights = bifidelity_weights(theta_lf, args.eps_w) if theta_lf is not None else None
    payload = {
        "k_constants": report.to_dict(),
        "layer_norms": layer_l1_norms(params, theta_lf=theta_lf, weights=weights).to_dict(),
        "ordering": check_k_ordering(report.to_dict()),
        "reference": dict(REFERENCE_K),
        "eps_w": args.eps_w,
    }
    print(write_json(Path(args.out) / "bounds.json", payload))
    return 0


def _dispatch(args) -> int:
    if args.command == "version":
        print(__version__)
        return 0
    if args.command == "generate-data":
        return _cmd_generate(args)
    if args.command == "bounds-report":
        return _cmd_bounds(args)
    if args.command == "crossover":
        run = load_run_config(args.config, args.overrides, preset(args.problem, args.scale))
        seed = _resolve_seed(args.seed, run.seed, args.command)
        rows = crossover_study(run.model_copy(update={"seed": seed}), args.n_h, Rng(seed), args.jobs)
        out_dir = Path(args.out)
        write_csv(out_dir / "crossover.csv", rows)
        print(write_json(out_dir / "crossover.json", {"problem": args.problem, "seed": seed, "rows": rows}))
        return 0

    if args.command == "reproduce":
        if args.seed is None:
            raise ConfigurationError("reproduce needs --seed")
        path, report = _experiment(args, preset(args.problem, args.scale))
    elif args.command == "train":
        path, report = _experiment(args, None, replications=1, keep_params=True)
    else:
        path, report = _experiment(args, None)
    print(path)
    return DIVERGED_EXIT if report.all_failed else 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    configure_logging(args.log_level)
    try:
        return _dispatch(args)
    except BfregError as exc:
        logger.error("%s", exc.detail)
        return exc.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
