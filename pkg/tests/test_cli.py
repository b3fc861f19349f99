"""Command-line surface tests."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from spikeshard.cli import main
from spikeshard.sampler import SpikedModel, dump_csv, sample_local


def _shard_csv(tmp_path, p=20, n=120, alpha=10.0, seed=1, worker_id=0, name="shard.csv"):
    model = SpikedModel(p=p, spikes=(alpha,))
    data = sample_local(model, n, seed=seed, worker_id=worker_id)
    path = tmp_path / name
    dump_csv(data, path)
    return path


def test_simulate_json(tmp_path, capsys):
    assert main(["simulate", "--p", "20", "--m", "3", "--alpha", "10", "--seed", "4"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["transport"]["messages_sent"] == 3
    assert payload["transport"]["rounds"] == 1
    assert payload["result"]["alpha"] == pytest.approx(10.0, abs=3.0)


def test_mse_table_to_file(tmp_path):
    out = tmp_path / "cells.csv"
    code = main(
        [
            "mse-table",
            "--alpha",
            "10",
            "--p-grid",
            "20",
            "--m-grid",
            "3",
            "--reps",
            "2",
            "--seed",
            "5",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    assert float(rows[0]["mse_weighted"]) >= 0.0


def test_worker_and_coordinate(tmp_path, capsys):
    lines = []
    for worker_id in range(2):
        path = _shard_csv(tmp_path, seed=worker_id + 10, worker_id=worker_id, name=f"s{worker_id}.csv")
        assert main(["worker", "--data", str(path), "--worker-id", str(worker_id)]) == 0
        lines.append(capsys.readouterr().out.strip())
    reports = tmp_path / "reports.jsonl"
    reports.write_text("\n".join(lines) + "\n")
    assert main(["coordinate", "--p", "20", "--input", str(reports)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["alpha"] == pytest.approx(10.0, abs=3.0)
    assert len(result["weights"]) == 2


def test_worker_emits_status_line_for_flat_shard(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    path.write_text("1.0,1.0,-1.0,-1.0\n1.0,-1.0,1.0,-1.0\n")
    assert main(["worker", "--data", str(path)]) == 0
    line = capsys.readouterr().out.strip()
    assert json.loads(line)["status"] == "not_spiked"


def test_error_object_on_stderr(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,oops\n")
    code = main(["analyze", "--data", str(bad), "--m-grid", "1"])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NonNumericCell"


def test_missing_file_error(capsys):
    code = main(["worker", "--data", "/nonexistent/shard.csv"])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert "error" in err


def test_analyze_synthetic(tmp_path):
    # rotated spike so the estimate survives per-column standardization
    model = SpikedModel(p=10, spikes=(6.0,), rotation="random", rotation_seed=1)
    table = sample_local(model, 300, seed=3).observations.T
    path = tmp_path / "table.csv"
    with path.open("w") as fh:
        fh.write(",".join(f"f{i}" for i in range(10)) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    out = tmp_path / "real.csv"
    assert main(["analyze", "--data", str(path), "--m-grid", "1,2", "--seed", "8", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [int(r["m"]) for r in rows] == [1, 2]
    assert float(rows[0]["pooled"]) == float(rows[0]["weighted"])


def test_config_file_drives_grid(tmp_path):
    config = {
        "alpha": 10.0,
        "p_grid": [16],
        "m_grid": [2],
        "reps": 2,
        "partition": {"rule": "fixed", "sizes": [40, 60]},
        "seed": 12,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    out = tmp_path / "cells.csv"
    assert main(["mse-table", "--config", str(config_path), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["p"] == "16" and rows[0]["m"] == "2"


def test_rate_command(tmp_path, capsys):
    out = tmp_path / "rate.csv"
    code = main(
        [
            "rate",
            "--alpha",
            "10",
            "--p-grid",
            "16",
            "--m-grid",
            "2",
            "--n-totals",
            "128,512,2048",
            "--reps",
            "5",
            "--seed",
            "6",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert -2.0 < summary["slope"] < 0.0


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "spikeshard", "simulate", "--p", "12", "--m", "2", "--alpha", "8", "--seed", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["transport"]["messages_sent"] == 2
