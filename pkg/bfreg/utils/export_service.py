"""Export utilities - JSON reports, CSV tables and the optional Excel summary."""
import csv
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from bfreg.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def _atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """Write to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(value):
    """numpy scalars/arrays to plain Python; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps_json(payload) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, payload) -> Path:
    return _atomic_write_bytes(path, dumps_json(payload).encode("utf-8"))


def timing_path(report_path: str | Path) -> Path:
    path = Path(report_path)
    return path.with_name(path.stem + ".timing.json")


def write_timing_sidecar(report_path: str | Path, timing: dict) -> Path:
    """Wall-clock data lives beside the report so the report itself stays reproducible."""
    return write_json(timing_path(report_path), timing)


SUMMARY_COLUMNS = ("strategy", "lambda", "mean_eps_v", "std_eps_v", "n_failed")
REPLICATION_COLUMNS = (
    "strategy", "replication", "lambda", "eps_v", "best_iter", "init_index", "sparsity", "failed",
    "K_std_HF", "K_wgt_HF", "K_std_BF", "K_wgt_BF",
)
HISTOGRAM_COLUMNS = ("strategy", "replication", "histogram", "bin", "low", "high", "count")


def _rows_to_csv(rows: list[dict], fieldnames: list[str] | tuple[str, ...] | None = None) -> bytes:
    text_buf = io.StringIO()
    if not rows and not fieldnames:
        text_buf.write("No data\n")
    else:
        writer = csv.DictWriter(text_buf, fieldnames=fieldnames or list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(_jsonable(rows))
    return text_buf.getvalue().encode("utf-8")


def write_csv(path: str | Path, rows: list[dict], fieldnames: list[str] | tuple[str, ...] | None = None) -> Path:
    return _atomic_write_bytes(path, _rows_to_csv(rows, fieldnames))


def _report_workbook(table: list[dict], replications: list[dict], histograms: list[dict]) -> bytes:
    """Summary, per-replication and per-bin sheets with fixed column order and a frozen header."""
    try:
        from openpyxl import Workbook
    except ModuleNotFoundError as exc:
        raise ConfigurationError(
            "Excel export requires openpyxl. Install dependencies from requirements.txt"
        ) from exc

    wb = Workbook()
    summary = wb.active
    summary.title = "Summary"
    sheets = [
        (summary, SUMMARY_COLUMNS, table),
        (wb.create_sheet("Replications"), REPLICATION_COLUMNS, replications),
        (wb.create_sheet("Histograms"), HISTOGRAM_COLUMNS, histograms),
    ]
    for ws, columns, rows in sheets:
        ws.append(list(columns))
        ws.freeze_panes = "A2"
        for row in _jsonable(rows):
            ws.append([row.get(column) for column in columns])
    out = io.BytesIO()
    wb.save(out)
    return out.getvalue()


def write_report_tables(out_dir: str | Path, table: list[dict], replications: list[dict],
                        histograms: list[dict], xlsx: bool = False) -> list[Path]:
    """replications.csv and histograms.csv, plus summary.xlsx holding all three tables when asked."""
    out_dir = Path(out_dir)
    written = [
        write_csv(out_dir / "replications.csv", replications, REPLICATION_COLUMNS),
        write_csv(out_dir / "histograms.csv", histograms, HISTOGRAM_COLUMNS),
    ]
    if xlsx:
        book = _report_workbook(table, replications, histograms)
        written.append(_atomic_write_bytes(out_dir / "summary.xlsx", book))
        logger.info("Excel summary written to %s", written[-1])
    return written
