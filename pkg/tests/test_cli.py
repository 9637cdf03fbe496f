"""Command-line surface: exit codes, written artifacts and rerun stability."""
import csv
import json

import pytest

from bfreg import __version__
from bfreg.main import run
from bfreg.utils.export_service import REPLICATION_COLUMNS


def _write_config(path, **changes):
    data = {
        "problem": "beam",
        "arch": {"kind": "fnn", "hidden": [4]},
        "strategies": [
            {"type": "none"},
            {"type": "l1_standard", "lambda": 1e-3},
            {"type": "l1_bifidelity_weighted", "lambda": 1e-4},
        ],
        "counts": {"N_l": 12, "N_h": 3, "N_val": 6, "R": 1, "inits": 1},
        "optimizer": {"eta": 1e-2, "iters": 15},
        "lofi": {"lambda": 1e-3, "eta": 1e-2, "iters": 15},
        "n_elems": 50,
    }
    data.update(changes)
    path.write_text(json.dumps(data))
    return str(path)


def _csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ═══════════════════════════════════════
# Exit codes
# ═══════════════════════════════════════
class TestExitCodes:
    def test_version(self, capsys):
        assert run(["version"]) == 0
        assert capsys.readouterr().out.strip() == __version__

    def test_no_command(self, capsys):
        assert run([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_config_argument(self):
        assert run(["sweep"]) == 1

    def test_config_file_not_found(self, tmp_path):
        assert run(["sweep", "--config", str(tmp_path / "nope.json"), "--seed", "1"]) == 1

    def test_reproduce_needs_seed(self, capsys, tmp_path):
        assert run(["reproduce", "beam", "--out", str(tmp_path)]) == 1
        assert "--seed" in capsys.readouterr().err

    def test_unknown_config_key_is_named(self, tmp_path, capsys):
        config = _write_config(tmp_path / "run.json", optimiser={"eta": 1.0})
        assert run(["sweep", "--config", config, "--seed", "1", "--out", str(tmp_path / "out")]) == 1
        assert "optimiser" in capsys.readouterr().err
        assert not (tmp_path / "out" / "report.json").exists()

    def test_every_run_diverging_exits_2(self, tmp_path):
        config = _write_config(tmp_path / "run.json", strategies=[{"type": "none"}],
                               optimizer={"name": "sgd", "eta": 1e8, "iters": 200})
        out = tmp_path / "out"
        assert run(["sweep", "--config", config, "--seed", "1", "--out", str(out)]) == 2
        report = json.loads((out / "report.json").read_text())
        assert report["strategies"]["none"]["n_failed"] == 1


# ═══════════════════════════════════════
# Data generation
# ═══════════════════════════════════════
class TestGenerateData:
    def test_beam_files(self, tmp_path, capsys):
        code = run(["generate-data", "beam", "--n-lo", "5", "--n-hi", "2", "--n-val", "3",
                    "--n-elems", "50", "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        assert [len(_csv_rows(tmp_path / f"{name}.csv")) for name in ("lo", "hi", "val")] == [5, 2, 3]
        assert capsys.readouterr().out.strip().endswith("dataset.json")

    def test_seed_required(self, tmp_path):
        assert run(["generate-data", "beam", "--n-lo", "5", "--n-hi", "2", "--n-val", "3",
                    "--out", str(tmp_path)]) == 1

    def test_bad_count(self, tmp_path):
        assert run(["generate-data", "nozzle", "--n-lo", "0", "--n-hi", "2", "--n-val", "3",
                    "--seed", "1", "--out", str(tmp_path)]) == 1


# ═══════════════════════════════════════
# Experiments
# ═══════════════════════════════════════
class TestSweep:
    def test_report_and_tables(self, tmp_path):
        config = _write_config(tmp_path / "run.json")
        out = tmp_path / "a"
        assert run(["sweep", "--config", config, "--seed", "4", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report["strategies"]) == {"none", "l1_standard", "l1_bifidelity_weighted"}
        assert [row["strategy"] for row in report["table"]] == ["none", "l1_standard", "l1_bifidelity_weighted"]
        assert len(_csv_rows(out / "replications.csv")) == 3
        assert _csv_rows(out / "histograms.csv")
        timing = json.loads((out / "report.timing.json").read_text())
        assert timing["runtime_seconds"] >= 0 and len(timing["jobs"]) == 1

    def test_rerun_is_byte_identical(self, tmp_path):
        config = _write_config(tmp_path / "run.json")
        for name in ("a", "b"):
            assert run(["sweep", "--config", config, "--seed", "4", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
        assert (tmp_path / "a" / "replications.csv").read_bytes() == (tmp_path / "b" / "replications.csv").read_bytes()

    def test_override_and_config_seed(self, tmp_path):
        config = _write_config(tmp_path / "run.json", seed=9)
        out = tmp_path / "out"
        assert run(["sweep", "--config", config, "--set", "counts.R=2", "--out", str(out), "--xlsx"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["seed"] == 9 and report["config"]["counts"]["R"] == 2
        assert (out / "summary.xlsx").exists()

    def test_seed_required(self, tmp_path):
        config = _write_config(tmp_path / "run.json")
        assert run(["sweep", "--config", config, "--out", str(tmp_path / "out")]) == 1

    def test_workbook_mirrors_the_tables(self, tmp_path):
        openpyxl = pytest.importorskip("openpyxl")
        config = _write_config(tmp_path / "run.json")
        out = tmp_path / "out"
        assert run(["sweep", "--config", config, "--seed", "4", "--out", str(out), "--xlsx"]) == 0
        book = openpyxl.load_workbook(out / "summary.xlsx")
        assert book.sheetnames == ["Summary", "Replications", "Histograms"]
        with open(out / "replications.csv", newline="") as fh:
            csv_rows = list(csv.reader(fh))
        sheet_rows = [list(row) for row in book["Replications"].iter_rows(values_only=True)]
        assert tuple(csv_rows[0]) == REPLICATION_COLUMNS == tuple(sheet_rows[0])
        assert len(sheet_rows) == len(csv_rows)
        assert [row[0] for row in book["Summary"].iter_rows(min_row=2, values_only=True)] == [
            "none", "l1_standard", "l1_bifidelity_weighted"]
        assert book["Histograms"].freeze_panes == "A2"


class TestTrainThenBounds:
    def test_parameter_dumps_feed_the_bounds_report(self, tmp_path, capsys):
        config = _write_config(tmp_path / "run.json")
        out = tmp_path / "out"
        assert run(["train", "--config", config, "--seed", "2", "--out", str(out)]) == 0
        for label in ("none", "l1_standard", "l1_bifidelity_weighted", "theta_lf"):
            assert (out / f"params_{label}.json").exists()

        code = run(["bounds-report", "--params", str(out / "params_l1_bifidelity_weighted.json"),
                    "--theta-lf", str(out / "params_theta_lf.json"), "--out", str(out)])
        assert code == 0
        bounds = json.loads((out / "bounds.json").read_text())
        assert set(bounds["k_constants"]) >= {"K_std_HF", "K_wgt_HF", "K_std_BF", "K_wgt_BF"}
        assert all(value > 0 for value in bounds["k_constants"].values() if value is not None)
        assert bounds["ordering"]["status"] in ("pass", "warn")

    def test_missing_params_file(self, tmp_path):
        assert run(["bounds-report", "--params", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


@pytest.mark.slow
class TestReproduceSmoke:
    def test_beam_desk_writes_the_table(self, tmp_path):
        out = tmp_path / "out"
        code = run(["reproduce", "beam", "--seed", "7", "--out", str(out),
                    "--set", "counts.R=1", "--set", "counts.inits=1",
                    "--set", "optimizer.iters=50", "--set", "lofi.iters=50"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["table"]) == 6 and report["reference"]["table"]
