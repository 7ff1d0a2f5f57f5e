from __future__ import annotations

import csv
import io
import json
import os
import subprocess
import sys

import pytest

from semev.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_json(capsys):
    code, out, _ = run(capsys, "solve", "--v", "1", "--psi", "2", "--r", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["s_star"] == pytest.approx(1.3429230828, abs=1e-9)
    assert doc["phi_residual"] <= 1e-10


def test_solve_domain_error(capsys):
    code, out, err = run(capsys, "solve", "--v", "1", "--psi", "1.5", "--r", "1")
    assert code == 2 and out == ""
    assert "prize ratio below 2" in err and err.count("\n") == 1


def test_config_parity(tmp_path, capsys):
    cfg = tmp_path / "contest.json"
    cfg.write_text(json.dumps({"v": 1, "psi": 3, "r": 2, "c-i": 0.1}))
    _, from_file, _ = run(capsys, "solve", "--config", str(cfg))
    _, from_flags, _ = run(capsys, "solve", "--v", "1", "--psi", "3", "--r", "2", "--c-i", "0.1")
    assert from_file == from_flags
    _, override, _ = run(capsys, "solve", "--config", str(cfg), "--psi", "4")
    assert json.loads(override)["Psi"] == 4.0


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"bogus": 1}')
    assert run(capsys, "solve", "--config", str(cfg))[0] == 2
    cfg.write_text('{"v": "abc"}')
    assert run(capsys, "solve", "--config", str(cfg))[0] == 2
    cfg.write_text("{\n oops")
    code, _, err = run(capsys, "solve", "--config", str(cfg))
    assert code == 2 and ":2:" in err
    assert run(capsys, "solve", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "solve", "--v", "x")[0] == 2
    assert run(capsys)[0] == 2


def test_sweep_prize_ratio_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "prize_ratio", "--start", "2", "--stop", "1000",
                       "--steps", "50", "--log")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 50 and list(rows[0])[0] == "prize_ratio"
    tax = [float(r["tax_over_V"]) for r in rows]
    assert all(b > a for a, b in zip(tax, tax[1:]))
    # floats survive the round trip exactly
    assert float(rows[0]["s_star"]) == json.loads(run(capsys, "solve")[1])["s_star"]


def test_sweep_alpha_affine(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "alpha", "--start", "0", "--stop", "1", "--steps", "11",
                       "--c-i", "0.2")
    rows = list(csv.DictReader(io.StringIO(out)))
    cost = [float(r["cost"]) for r in rows]
    diffs = [b - a for a, b in zip(cost, cost[1:])]
    assert code == 0 and max(diffs) - min(diffs) < 1e-12 and cost[-1] == 0.2


@pytest.mark.parametrize("argv", [
    ("--axis", "alpha", "--start", "0", "--stop", "1", "--steps", "0"),
    ("--axis", "alpha", "--start", "0", "--stop", "2", "--steps", "3"),
    ("--axis", "prize_ratio", "--start", "1", "--stop", "5", "--steps", "3"),
    ("--axis", "r", "--start", "3", "--stop", "2", "--steps", "3"),
    ("--axis", "r", "--start", "1", "--steps", "3"),
])
def test_sweep_invalid_range(capsys, argv):
    assert run(capsys, "sweep", *argv)[0] == 2


def test_simulate_and_repeat(capsys):
    argv = ("simulate", "--trials", "20000", "--seed", "7")
    code, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert code == 0 and first == second
    assert json.loads(first)["trials"] == 20000


def test_simulate_alpha_one_costs_c_i(capsys):
    code, out, _ = run(capsys, "simulate", "--alpha", "1", "--trials", "5000", "--c-i", "0.3")
    doc = json.loads(out)
    assert code == 0 and doc["empirical_cost"] == 0.3 == doc["analytic_cost"]


def test_simulate_trials_csv(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run(capsys, "simulate", "--trials", "50", "--trials-csv", "--out", str(out))[0] == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["artifacts"]) == {"report.json", "trials.csv"}
    assert (out / "trials.csv").read_text().count("\n") == 51
    assert run(capsys, "simulate", "--trials-csv")[0] == 2
    assert run(capsys, "simulate", "--regime", "sideways")[0] == 2
    assert run(capsys, "simulate", "--trials", "0")[0] == 2


def test_synth_then_pipeline(tmp_path, capsys):
    s1, s2 = tmp_path / "s1", tmp_path / "s2"
    assert run(capsys, "synth", "--addresses", "20", "--seed", "4", "--out", str(s1))[0] == 0
    assert run(capsys, "synth", "--addresses", "20", "--seed", "4", "--out", str(s2))[0] == 0
    m1 = json.loads((s1 / "manifest.json").read_text())
    m2 = json.loads((s2 / "manifest.json").read_text())
    assert m1["artifacts"] == m2["artifacts"] and len(m1["artifacts"]) == 4

    out = tmp_path / "p"
    code, _, _ = run(capsys, "pipeline", "--transfers", str(s1 / "transfers.jsonl"),
                     "--sanctions", str(s1 / "sanctions.jsonl"), "--labels", str(s1 / "labels.csv"),
                     "--ground-truth", str(s1 / "ground_truth.json"), "--k-max", "3", "--out", str(out))
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["artifacts"]) == {"episodes.csv", "regimes.json", "evaluation.json"}
    assert manifest["extra"]["funnel"]["aed"] > 0
    assert sorted(p.name for p in out.iterdir()) == ["episodes.csv", "evaluation.json", "manifest.json", "regimes.json"]
    assert json.loads((out / "evaluation.json").read_text())["episode_f1"] >= 0.95


def test_synth_errors(tmp_path, capsys):
    assert run(capsys, "synth", "--addresses", "0", "--out", str(tmp_path / "x"))[0] == 2
    assert run(capsys, "synth")[0] == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(capsys, "synth", "--addresses", "3", "--out", str(blocker / "sub"))[0] == 2


def test_pipeline_errors(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code, _, err = run(capsys, "pipeline", "--transfers", str(tmp_path / "nope.jsonl"),
                       "--sanctions", str(empty), "--out", str(tmp_path / "o1"))
    assert code == 2 and "nope.jsonl" in err
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"token": "USDT"}\n')
    code, _, err = run(capsys, "pipeline", "--transfers", str(bad), "--sanctions", str(empty),
                       "--out", str(tmp_path / "o2"))
    assert code == 2 and f"{bad}:1:" in err
    assert run(capsys, "pipeline", "--transfers", str(empty), "--sanctions", str(empty))[0] == 2


def test_pipeline_empty_inputs(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    out = tmp_path / "o"
    assert run(capsys, "pipeline", "--transfers", str(empty), "--sanctions", str(empty), "--out", str(out))[0] == 0
    assert (out / "episodes.csv").read_text().count("\n") == 1


def test_log_level_env(monkeypatch, capsys):
    monkeypatch.setenv("SEMEV_LOG", "chatty")
    assert run(capsys, "solve")[0] == 2


def test_internal_error_exit_code(monkeypatch, capsys):
    import semev.cli as cli

    def boom(opts, started):
        raise RuntimeError("kaput")

    monkeypatch.setitem(cli.COMMANDS, "solve", boom)
    code, _, err = run(capsys, "solve")
    assert code == 1 and "kaput" in err


def test_module_entry_point():
    env = {**os.environ, "SEMEV_LOG": "error"}
    proc = subprocess.run([sys.executable, "-m", "semev", "solve", "--psi", "3"], capture_output=True, text=True,
                          env=env, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["Psi"] == 3.0
