import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ttgo.cli import EXIT_ARGS, EXIT_BUDGET, EXIT_FORMAT, EXIT_OK, main, sidecar_path
from ttgo.persist import load_model

ROSEN = {"kind": "rosenbrock", "name": "rosen", "d1": 2, "d2": 2, "beta": 1.0,
         "params": {"decision_bounds": [-2.5, 2.5]}}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "rosen.json"
    cfg.write_text(json.dumps(ROSEN))
    model = d / "rosen.ttgo"
    code = main(["train", "--problem", str(cfg), "--out", str(model), "--max-rank", "20", "--sweeps", "6",
                 "--tol", "1e-2", "--kick", "4", "--grid-counts", "20", "20", "80", "80"])
    assert code in (EXIT_OK, EXIT_BUDGET)
    return d, cfg, model


def test_train_writes_model_and_sidecar(trained, capsys):
    d, cfg, model = trained
    assert model.exists()
    assert json.loads(sidecar_path(model).read_text()) == ROSEN
    assert load_model(model).grid.counts == (20, 20, 80, 80)


def test_info(trained, capsys):
    _, _, model = trained
    assert main(["info", "--model", str(model)]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    m = load_model(model)
    assert rec["ranks"] == list(m.tt.ranks)
    assert rec["params"] == sum(c.size for c in m.tt.cores)
    assert rec["grid"]["counts"] == [20, 20, 80, 80]


def test_solve_csv_and_json(trained, capsys):
    d, _, model = trained
    out = d / "sol.csv"
    args = ["solve", "--model", str(model), "--task", "0.5,100", "--alpha", "0.5", "--samples", "100",
            "--top", "3", "--out"]
    assert main(args + [str(out)]) == EXIT_OK
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 and list(rows[0]) == ["rank", "x0", "x1", "c_i", "c_f", "success"]
    best = np.array([float(rows[0]["x0"]), float(rows[0]["x1"])])
    assert np.max(np.abs(best - [0.5, 0.25])) < 1e-3
    assert all(float(r["c_f"]) <= float(r["c_i"]) for r in rows)
    assert main(args + ["json"]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    assert rec[0]["c_f"] == float(rows[0]["c_f"])
    assert main(["solve", "--model", str(model), "--task", "0.5,100", "--no-refine", "--top", "2"]) == EXIT_OK
    text = capsys.readouterr().out.splitlines()
    assert len(text) == 3 and text[1].split(",")[4] == ""


def test_sample(trained, capsys):
    d, _, model = trained
    out = d / "s.csv"
    assert main(["sample", "--model", str(model), "--task", "1,100", "--alpha", "0.9", "--n", "25",
                 "--seed", "3", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "i0,i1,x0,x1,log_weight" and len(lines) == 26


def test_argument_errors(trained, capsys):
    d, cfg, model = trained
    assert main(["solve", "--model", str(model), "--task", "1"]) == EXIT_ARGS
    assert main(["solve", "--model", str(model), "--task", "a,b"]) == EXIT_ARGS
    assert main(["train", "--problem", str(cfg), "--out", str(d / "x.ttgo"), "--grid-counts", "5", "5"]) == EXIT_ARGS
    assert main(["frobnicate"]) == EXIT_ARGS
    assert main(["info", "--model", str(d / "missing.ttgo")]) == EXIT_ARGS
    assert main(["benchmark", "--suite", "nope", "--out", str(d / "b")]) == EXIT_ARGS
    lonely = d / "lonely.ttgo"
    shutil.copy(model, lonely)
    assert main(["solve", "--model", str(lonely), "--task", "1,100"]) == EXIT_ARGS
    assert main(["solve", "--model", str(lonely), "--task", "1,100", "--problem", str(cfg),
                 "--out", "json"]) == EXIT_OK


def test_corrupt_model_exit_code(trained, capsys):
    d, _, model = trained
    bad = d / "bad.ttgo"
    data = bytearray(model.read_bytes())
    data[100] ^= 1
    bad.write_bytes(bytes(data))
    assert main(["info", "--model", str(bad)]) == EXIT_FORMAT
    assert "[crc]" in capsys.readouterr().err


def test_budget_exhausted_exit_code(tmp_path, capsys):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps({"kind": "himmelblau", "d2": 2, "beta": 1.0}))
    out = tmp_path / "m.ttgo"
    assert main(["train", "--problem", str(cfg), "--out", str(out), "--max-rank", "3", "--sweeps", "1",
                 "--tol", "1e-12", "--grid-counts", "50"]) == EXIT_BUDGET
    assert out.exists()


def test_benchmark_quick(tmp_path, capsys):
    out = tmp_path / "bench"
    assert main(["benchmark", "--suite", "sinusoid", "--out", str(out), "--quick"]) == EXIT_OK
    assert (out / "sinusoid_metrics.csv").exists()
    assert (out / "sinusoid_metrics.png").stat().st_size > 0
    assert (out / "sinusoid_samples.png").stat().st_size > 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary[0]["suite"] == "sinusoid"
    with open(out / "sinusoid_metrics.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["alpha", "n_samples", "mean_ci", "mean_cf", "success_pct", "arm"]


def test_console_script(trained):
    _, _, model = trained
    proc = subprocess.run([sys.executable, "-m", "ttgo.cli", "info", "--model", str(model)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["d1"] == 2
