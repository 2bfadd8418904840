from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from haarbridge.cli import EXIT_OK, EXIT_STAT, EXIT_USAGE, run


def test_sample_dft_csv(tmp_path, capsys):
    out = tmp_path / "f4.csv"
    assert run(["sample", "--ensemble", "dft", "--n", "4", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 16
    ent = {(int(r["i"]), int(r["j"])): complex(float(r["re"]), float(r["im"])) for r in rows}
    assert ent[(2, 2)] == -0.5j
    assert ent[(3, 3)] == 0.5
    assert all(abs(abs(v) - 0.5) < 1e-15 for v in ent.values())


def test_sample_json_is_unitary(capsys):
    assert run(["sample", "--ensemble", "orthogonal", "--n", "5", "--replicas", "2", "--seed", "3"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    m = np.array(doc["matrices"][1]["re"]) + 1j * np.array(doc["matrices"][1]["im"])
    assert np.allclose(m @ m.conj().T, np.eye(5))
    assert doc["config"]["seed"] == 3 and "threads" not in doc["config"]


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("HAARBRIDGE_SEED", "11")
    run(["sample", "--n", "3"])
    a = capsys.readouterr().out
    run(["sample", "--n", "3", "--seed", "11"])
    assert capsys.readouterr().out == a
    monkeypatch.setenv("HAARBRIDGE_SEED", "zz")
    assert run(["sample", "--n", "3"]) == EXIT_USAGE


def test_output_independent_of_threads(tmp_path):
    outs = []
    for th in ("1", "3"):
        p = tmp_path / f"c{th}.json"
        code = run(["covariance", "--ensemble", "orthogonal", "--n", "8", "--replicas", "3000", "--threads", th, "--out", str(p)])
        assert code == EXIT_OK
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_verify_moments_and_exact_table(capsys):
    assert run(["verify-moments", "--ensemble", "unitary", "--n", "6", "--replicas", "20000"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"]
    names = {r["name"]: r for r in doc["exact"]["6"]}
    assert names["E|U11|^4"]["exact_value"] == "1/21"


@pytest.mark.parametrize(
    "argv",
    [
        ["decompose-check", "--ensemble", "permutation", "--n", "5", "9", "--replicas", "10"],
        ["covariance", "--process", "calT", "--ensemble", "dft", "--n", "10", "--replicas", "4000", "--grid", "0.3,0.8"],
        ["marginal", "--ensemble", "unitary", "--n", "60", "--replicas", "800"],
        ["marginal", "--process", "calT", "--ensemble", "permutation", "--n", "500", "--replicas", "800"],
        ["lindeberg", "--n", "8", "32", "--replicas", "800", "--s", "0.3", "--t", "0.3"],
        ["spacings", "--n", "100", "1000", "--replicas", "100"],
    ],
)
def test_verbs_run(argv, tmp_path):
    out = tmp_path / "r.csv"
    code = run(argv + ["--out", str(out)])
    assert code in (EXIT_OK, EXIT_STAT)
    text = out.read_text()
    assert text.splitlines()[1].startswith("experiment,n,s,t")


def test_statistical_failure_exit_code(tmp_path, capsys):
    # Lindeberg at two tiny orders with a strict distance cannot pass
    code = run(["lindeberg", "--n", "4", "5", "--replicas", "300", "--out", str(tmp_path / "x.json")])
    assert code == EXIT_STAT
    report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert report["status"] == "statistical-failure" and report["failed"]


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["sample", "--n", "0"],
        ["sample", "--replicas", "0"],
        ["sample", "--threads", "0"],
        ["sample", "--ensemble", "gue"],
        ["sample", "--seed", "-4"],
        ["verify-moments", "--ensemble", "dft"],
        ["marginal", "--s", "0"],
        ["covariance", "--grid", "0.5,0.2"],
        ["suite", "--only", "99"],
        ["suite", "--scale", "0"],
        ["sample", "--out", "/nonexistent-dir/x.csv"],
    ],
)
def test_usage_errors(argv, capsys):
    assert run(argv) == EXIT_USAGE


def test_config_file_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ensemble": "permutation", "n": 3, "seed": 5}))
    assert run(["sample", "--config", str(cfg)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["ensemble"] == "permutation" and doc["config"]["n"] == [3]
    cfg.write_text(json.dumps({"nope": 1}))
    assert run(["sample", "--config", str(cfg)]) == EXIT_USAGE
    assert run(["sample", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_suite_verb_small(tmp_path):
    code = run(["suite", "--only", "1", "12", "--scale", "0.1", "--out", str(tmp_path / "s")])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert [c["number"] for c in summary["criteria"]] == [1, 12]
    assert (tmp_path / "s" / "criterion_01.csv").exists()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "haarbridge.cli", "sample", "--ensemble", "dft", "--n", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["matrices"][0]["re"][1][1] == pytest.approx(-2**-0.5)
