"""Bi-fidelity dataset generation plus CSV and JSON bundle IO."""
import csv
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from bfreg.exceptions import ConfigurationError, InputError
from bfreg.modules.linalg import Rng
from bfreg.modules.problems.beam_service import sample_beam_inputs, beam_samples
from bfreg.modules.problems.models import (
    BiFidelityDataset, Split, UNITS, NOZZLE_LO_GRID, NOZZLE_HI_GRID,
)
from bfreg.modules.problems.nozzle_service import nozzle_samples
from bfreg.modules.problems.schemas import BeamRow, DatasetBundle, SplitSchema
from bfreg.utils.export_service import write_csv, write_json

logger = logging.getLogger(__name__)

BEAM_COLUMNS = ["q", "E1", "E2", "E3", "y"]


def _check_counts(**counts: int) -> None:
    for name, value in counts.items():
        if value < 1:
            raise ConfigurationError(f"{name} must be >= 1, got {value}")


# ─── Generation ─────────────────────────────────────────────────

def _beam_split(rng: Rng, n: int, fidelity: str, n_elems: int) -> Split:
    inputs = sample_beam_inputs(rng, n)
    samples = beam_samples(inputs, fidelity, n_elems)
    y = np.array([[s.tip_deflection] for s in samples])
    return Split(inputs, y, inputs)


def _nozzle_split(rng: Rng, n: int, n_grid: int) -> Split:
    samples = nozzle_samples(rng, n, n_grid)
    fields = np.stack([s.field for s in samples])
    inputs = np.array([[s.xi, s.delta] for s in samples])
    return Split(fields, fields.copy(), inputs)


def generate_bifidelity_dataset(problem: str, n_lo: int, n_hi: int, n_val: int, rng: Rng, *,
                                n_elems: int = 200, lo_grid: int = NOZZLE_LO_GRID,
                                hi_grid: int = NOZZLE_HI_GRID, hi_csv: str | None = None,
                                val_csv: str | None = None, lo_csv: str | None = None) -> BiFidelityDataset:
    """Draw lo/hi/val from independent children of ``rng`` (0, 1, 2).

    Beam x is (q, E1, E2, E3) in input units, y the tip deflection; ``hi_csv`` /
    ``val_csv`` replace the finite-element proxy with externally solved data.
    Nozzle x = y = the steady field, lo on ``lo_grid`` points and hi/val on ``hi_grid``.
    Tabular reads all three splits from CSV files.
    """
    _check_counts(N_l=n_lo, N_h=n_hi, N_val=n_val)
    seed_meta = {"seed": rng.seed, "rng_path": list(rng.path)}
    if problem == "beam":
        lo = _beam_split(rng.split(0), n_lo, "lo", n_elems)
        hi = read_beam_csv(hi_csv) if hi_csv else _beam_split(rng.split(1), n_hi, "hi", n_elems)
        val = read_beam_csv(val_csv) if val_csv else _beam_split(rng.split(2), n_val, "hi", n_elems)
        meta = {"problem": "beam", "units": UNITS, "n_elems": n_elems,
                "hi_source": hi_csv or "fe_proxy", "val_source": val_csv or "fe_proxy"}
    elif problem == "nozzle":
        lo = _nozzle_split(rng.split(0), n_lo, lo_grid)
        hi = _nozzle_split(rng.split(1), n_hi, hi_grid)
        val = _nozzle_split(rng.split(2), n_val, hi_grid)
        meta = {"problem": "nozzle", "grids": {"lo": lo_grid, "hi": hi_grid}}
    elif problem == "tabular":
        if not (lo_csv and hi_csv and val_csv):
            raise ConfigurationError("tabular problem needs lo_csv, hi_csv and val_csv")
        lo, hi, val = read_tabular_csv(lo_csv), read_tabular_csv(hi_csv), read_tabular_csv(val_csv)
        meta = {"problem": "tabular", "sources": {"lo": lo_csv, "hi": hi_csv, "val": val_csv}}
    else:
        raise ConfigurationError(f"unknown problem '{problem}' (expected beam, nozzle or tabular)")
    meta.update(seed_meta)
    meta["counts"] = {"N_l": len(lo), "N_h": len(hi), "N_val": len(val)}
    logger.info("Generated %s dataset: %s low, %s high, %s validation samples",
                problem, len(lo), len(hi), len(val))
    return BiFidelityDataset(lo, hi, val, meta)


# ─── CSV ────────────────────────────────────────────────────────

def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, dict]]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"CSV file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise InputError(f"{path}: missing header row")
        # line 1 is the header
        rows = [(line, row) for line, row in enumerate(reader, start=2)]
    if not rows:
        raise InputError(f"{path}: no data rows")
    return list(reader.fieldnames), rows


def _parse_float(path, line: int, column: str, raw) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: row {line}: column '{column}' is not a number: {raw!r}") from exc
    if not np.isfinite(value):
        raise InputError(f"{path}: row {line}: column '{column}' is not finite")
    return value


def _indexed_columns(header: list[str], prefix: str) -> list[str]:
    columns = [c for c in header if c.startswith(prefix) and c[len(prefix):].isdigit()]
    expected = [f"{prefix}{i}" for i in range(len(columns))]
    if not columns or sorted(columns, key=lambda c: int(c[len(prefix):])) != expected:
        raise InputError(f"header needs consecutive columns {prefix}0..{prefix}{{n-1}}, got {header}")
    return expected


def read_beam_csv(path: str | Path) -> Split:
    """Columns q,E1,E2,E3,y; moduli must be positive."""
    header, rows = _read_rows(path)
    if set(header) != set(BEAM_COLUMNS):
        raise InputError(f"{path}: beam CSV needs columns {BEAM_COLUMNS}, got {header}")
    parsed = []
    for line, row in rows:
        try:
            parsed.append(BeamRow.model_validate(row))
        except ValidationError as exc:
            err = exc.errors()[0]
            column = ".".join(str(p) for p in err["loc"])
            raise InputError(f"{path}: row {line}: column '{column}': {err['msg']}") from exc
    x = np.array([[r.q, r.E1, r.E2, r.E3] for r in parsed])
    y = np.array([[r.y] for r in parsed])
    return Split(x, y, x.copy())


def read_nozzle_csv(path: str | Path) -> Split:
    """Columns x_0..x_{n-1}: one steady field per row, used as input and target."""
    header, rows = _read_rows(path)
    try:
        columns = _indexed_columns(header, "x_")
    except InputError as exc:
        raise InputError(f"{path}: {exc.detail}") from exc
    fields = np.array([[_parse_float(path, line, c, row[c]) for c in columns] for line, row in rows])
    return Split(fields, fields.copy())


def read_tabular_csv(path: str | Path) -> Split:
    """Columns x_0..x_{d-1} and y_0..y_{m-1}."""
    header, rows = _read_rows(path)
    try:
        x_cols = _indexed_columns(header, "x_")
        y_cols = _indexed_columns(header, "y_")
    except InputError as exc:
        raise InputError(f"{path}: {exc.detail}") from exc
    x = np.array([[_parse_float(path, line, c, row[c]) for c in x_cols] for line, row in rows])
    y = np.array([[_parse_float(path, line, c, row[c]) for c in y_cols] for line, row in rows])
    return Split(x, y)


def _split_rows(split: Split, problem: str) -> tuple[list[dict], list[str]]:
    if problem == "beam":
        rows = [dict(zip(BEAM_COLUMNS, [*x, y[0]])) for x, y in zip(split.x, split.y)]
        return rows, BEAM_COLUMNS
    if problem == "nozzle":
        columns = [f"x_{i}" for i in range(split.x.shape[1])]
        return [dict(zip(columns, x)) for x in split.x], columns
    columns = [f"x_{i}" for i in range(split.x.shape[1])] + [f"y_{i}" for i in range(split.y.shape[1])]
    return [dict(zip(columns, [*x, *y])) for x, y in zip(split.x, split.y)], columns


def write_dataset_csv(dataset: BiFidelityDataset, out_dir: str | Path) -> dict[str, Path]:
    """lo.csv, hi.csv, val.csv in the problem's column layout."""
    out_dir = Path(out_dir)
    paths = {}
    for name in ("lo", "hi", "val"):
        rows, columns = _split_rows(getattr(dataset, name), dataset.problem)
        paths[name] = write_csv(out_dir / f"{name}.csv", rows, columns)
    return paths


# ─── JSON bundle ────────────────────────────────────────────────

def _split_schema(split: Split) -> SplitSchema:
    return SplitSchema(
        x=split.x.tolist(), y=split.y.tolist(),
        inputs=None if split.inputs is None else np.atleast_2d(split.inputs).tolist(),
    )


def write_dataset_bundle(dataset: BiFidelityDataset, path: str | Path) -> Path:
    bundle = DatasetBundle(meta=dataset.meta, lo=_split_schema(dataset.lo),
                           hi=_split_schema(dataset.hi), val=_split_schema(dataset.val))
    return write_json(path, bundle.model_dump())


def read_dataset_bundle(path: str | Path) -> BiFidelityDataset:
    try:
        bundle = DatasetBundle.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"dataset bundle not found: {path}") from exc
    except ValidationError as exc:
        err = exc.errors()[0]
        raise InputError(f"{path}: {'.'.join(str(p) for p in err['loc'])}: {err['msg']}") from exc

    def to_split(s: SplitSchema) -> Split:
        return Split(np.array(s.x), np.array(s.y), None if s.inputs is None else np.array(s.inputs))

    return BiFidelityDataset(to_split(bundle.lo), to_split(bundle.hi), to_split(bundle.val), bundle.meta)
