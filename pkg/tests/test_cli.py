import json
import os
import subprocess
import sys

import pytest

from clustergp.cli import main
from clustergp.harness import read_trace


def test_tune_registry_objective(tmp_path, capsys):
    out = str(tmp_path / "run")
    rc = main(["tune", "--objective", "f3", "--budget", "8", "--pilot", "4",
               "--seed", "0", "--clustering", "kmeans:2", "--out", out])
    assert rc == 0
    captured = capsys.readouterr()
    assert "best y" in captured.out
    trace = os.path.join(out, "tune", "trace_0.csv")
    assert os.path.exists(trace)
    assert os.path.exists(os.path.join(out, "batch_config.json"))
    assert len(read_trace(trace)) == 8


def test_tune_direction_from_registry(tmp_path):
    out = str(tmp_path / "run")
    rc = main(["tune", "--objective", "bukin_n6", "--budget", "7", "--pilot", "4",
               "--out", out])
    assert rc == 0
    records = read_trace(os.path.join(out, "tune", "trace_0.csv"))
    assert records[-1].best_y == min(r.y for r in records)


def test_tune_replay(tmp_path, capsys):
    table = tmp_path / "table.csv"
    rows = ["x0,y"] + [f"{i},{float(-(i - 6) ** 2)}" for i in range(10)]
    table.write_text("\n".join(rows) + "\n")
    space = tmp_path / "space.json"
    space.write_text(json.dumps([{"lower": 0, "upper": 9, "kind": "integer"}]))
    out = str(tmp_path / "run")
    rc = main(["tune", "--replay", str(table), "--space", str(space),
               "--budget", "6", "--pilot", "3", "--out", out])
    assert rc == 0
    assert "best y" in capsys.readouterr().out


def test_tune_command_objective(tmp_path):
    space = tmp_path / "space.json"
    space.write_text(json.dumps([{"lower": 0.0, "upper": 1.0, "kind": "continuous"}]))
    out = str(tmp_path / "run")
    rc = main(["tune", "--command", "echo {x0}", "--space", str(space),
               "--budget", "5", "--pilot", "3", "--out", out])
    assert rc == 0
    records = read_trace(os.path.join(out, "tune", "trace_0.csv"))
    assert all(r.y == r.raw[0] for r in records)


def test_tune_fixed_partition(tmp_path):
    out = str(tmp_path / "run")
    rc = main(["tune", "--objective", "f1", "--budget", "8", "--pilot", "4",
               "--partition", "fixed:0:0.0", "--out", out])
    assert rc == 0


def test_tune_space_conflicts_with_registry(tmp_path, capsys):
    space = tmp_path / "space.json"
    space.write_text(json.dumps([{"lower": 0.0, "upper": 1.0, "kind": "continuous"}]))
    rc = main(["tune", "--objective", "f3", "--space", str(space),
               "--budget", "6", "--out", str(tmp_path / "run")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_tune_command_without_space_fails(tmp_path, capsys):
    rc = main(["tune", "--command", "echo {x0}", "--budget", "5",
               "--out", str(tmp_path / "run")])
    assert rc == 1
    assert "need --space" in capsys.readouterr().err


def test_tune_requires_one_source():
    with pytest.raises(SystemExit) as exc:
        main(["tune", "--budget", "5"])
    assert exc.value.code == 2


def test_tune_bad_clustering(tmp_path, capsys):
    rc = main(["tune", "--objective", "f3", "--budget", "6",
               "--clustering", "spectral:2", "--out", str(tmp_path / "run")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_tune_total_failure(tmp_path, capsys):
    space = tmp_path / "space.json"
    space.write_text(json.dumps([{"lower": 0.0, "upper": 1.0, "kind": "continuous"}]))
    out = str(tmp_path / "run")
    rc = main(["tune", "--command", "echo {x0}; exit 1", "--space", str(space),
               "--budget", "4", "--pilot", "2", "--out", out])
    assert rc == 1
    assert "failed" in capsys.readouterr().err


def test_bench_and_report(tmp_path, capsys):
    cfg = {
        "objective": "f3",
        "budget": 7,
        "pilot": 4,
        "seeds": [0, 1],
        "checkpoints": [2],
        "variants": {
            "gp": {"partition": "single", "fit_starts": 2, "fit_maxiter": 20},
            "cgp": {"clustering": "kmeans:2", "fit_starts": 2, "fit_maxiter": 20},
        },
    }
    cfg_path = tmp_path / "batch.json"
    cfg_path.write_text(json.dumps(cfg))
    out = str(tmp_path / "out")

    rc = main(["bench", "--config", str(cfg_path), "--out", out])
    assert rc == 0
    assert "traces written" in capsys.readouterr().out
    for variant in ("gp", "cgp"):
        for seed in (0, 1):
            assert os.path.exists(os.path.join(out, variant, f"trace_{seed}.csv"))

    rc = main(["report", "--in", out])
    assert rc == 0
    listed = capsys.readouterr().out.strip().splitlines()
    assert os.path.join(out, "stats.csv") in listed
    assert os.path.exists(os.path.join(out, "paired.csv"))


def test_report_missing_dir(tmp_path, capsys):
    rc = main(["report", "--in", str(tmp_path / "nowhere")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bench_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["bench", "--config", str(bad), "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_module_entrypoint_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "clustergp.cli", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "tune" in proc.stdout and "bench" in proc.stdout and "report" in proc.stdout