"""End-to-end command line runs, all in process through cli.main."""

import csv
import json
import math

import numpy as np
import pytest

from laxopt import cli, lax
from laxopt import net as netmod
from laxopt.cli import RunConfig
from laxopt.config import ConfigError
from laxopt.model import gear_preset

GEAR_DT05_OPTIMUM = -88.5128205128205

# Scalar integrator problem: x' = a on [0, 1], a in [0, 1], running cost a^2,
# terminal cost x.  The loose state box keeps every mode well defined.
RAMP_FILE = """
[problem]
n = 1
x0 = 0
name = ramp

[controls]
factors = box: 0 1

[dynamics]
A = 0

[dynamics.control_term]
h1 = 1 0 1

[cost.stage_control]
terms = 1 0 2

[cost.terminal]
lin = 1

[constraint]
kind = box
lo = -50
hi = 50

[grid]
t0 = 0
t_end = 1
steps = 10
"""


def write_ini(tmp_path, text, name="prob.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_solve_writes_summary_and_solution(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(["solve", "--preset", "gear", "--dt", "0.05",
                   "--out", str(out)])
    assert rc == 0
    summary = read_json(out / "summary.json")
    assert set(summary) == {"objective", "status", "iterations",
                            "wall_ms", "config"}
    assert summary["status"] == "Optimal"
    assert summary["objective"] == pytest.approx(GEAR_DT05_OPTIMUM, abs=1e-5)
    assert summary["wall_ms"] > 0.0
    assert summary["config"]["dt"] == 0.05
    assert summary["config"]["mode"] == "hard"
    sol = lax.load_solution(str(out / "lax_solution.csv"))
    assert sol.grid.steps == 20
    problem = gear_preset(steps=20)
    assert lax.relaxed_cost(problem, sol) == pytest.approx(
        summary["objective"], abs=1e-7)


def test_solve_runs_are_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["solve", "--preset", "gear", "--dt", "0.05",
                         "--out", str(out)]) == 0
        outs.append((out / "lax_solution.csv").read_bytes())
    assert outs[0] == outs[1]


def test_solve_rejects_bad_grid_spacing(tmp_path, capsys):
    rc = cli.main(["solve", "--preset", "gear", "--dt", "0.03",
                   "--out", str(tmp_path)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_solve_requires_a_problem_source(tmp_path):
    assert cli.main(["solve", "--out", str(tmp_path)]) == 2


def test_penalty_solve_and_eps_validation(tmp_path, capsys):
    out = tmp_path / "pen"
    rc = cli.main(["solve", "--preset", "gear", "--dt", "0.05",
                   "--mode", "penalty", "--eps", "0.01", "--out", str(out)])
    assert rc == 0
    summary = read_json(out / "summary.json")
    # dropping the hard state box can only lower the optimum
    assert summary["objective"] <= GEAR_DT05_OPTIMUM + 1e-6

    assert cli.main(["solve", "--preset", "gear", "--dt", "0.05",
                     "--mode", "penalty", "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["solve", "--preset", "gear", "--dt", "0.05",
                     "--mode", "penalty", "--eps", "1 0.1",
                     "--out", str(tmp_path / "y")]) == 2
    capsys.readouterr()


def test_solve_reports_infeasible_start(tmp_path, capsys):
    bad = RAMP_FILE.replace("x0 = 0", "x0 = 60")
    out = tmp_path / "run"
    rc = cli.main(["solve", "--config", write_ini(tmp_path, bad),
                   "--out", str(out)])
    assert rc == 1
    assert "solve failed" in capsys.readouterr().err
    summary = read_json(out / "summary.json")
    assert summary["error"]["kind"] == "infeasible"


def test_synthesize_writes_controller_files_and_reuses_solution(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["solve", "--preset", "gear", "--dt", "0.05",
                     "--out", str(out)]) == 0
    before = (out / "lax_solution.csv").read_bytes()

    rc = cli.main(["synthesize", "--preset", "gear", "--dt", "0.05",
                   "--delta", "0.1", "--out", str(out)])
    assert rc == 0
    assert (out / "lax_solution.csv").read_bytes() == before
    metrics = read_json(out / "metrics.json")
    assert metrics["method"] == "nearest"
    assert metrics["delta"] == 0.1
    assert metrics["net_size"] >= 2
    assert metrics["max_constraint_violation"] <= 1e-3
    assert metrics["control_tv"] >= 0.0
    assert math.isfinite(metrics["total_cost"])
    assert (out / "control.csv").exists()
    assert (out / "sim_trajectory.csv").exists()

    # stale stored solution on a different grid is an error, not a silent redo
    rc = cli.main(["synthesize", "--preset", "gear", "--dt", "0.1",
                   "--delta", "0.1", "--out", str(out)])
    assert rc == 2


def test_synthesize_accepts_prebuilt_net(tmp_path):
    net_dir = tmp_path / "net"
    rc = cli.main(["net-build", "--preset", "gear", "--delta", "0.02",
                   "--uniform", "50", "--out", str(net_dir)])
    assert rc == 0
    report = read_json(net_dir / "net_report.json")
    assert report["ok"] and report["size"] == 100

    out = tmp_path / "run"
    rc = cli.main(["synthesize", "--preset", "gear", "--dt", "0.05",
                   "--delta", "0.02", "--net", str(net_dir / "net.csv"),
                   "--out", str(out)])
    assert rc == 0
    assert read_json(out / "metrics.json")["net_size"] == 100


def test_net_build_reports_bad_uniform_spacing(tmp_path, capsys):
    out = tmp_path / "net"
    rc = cli.main(["net-build", "--preset", "gear", "--delta", "0.02",
                   "--uniform", "2", "--out", str(out)])
    assert rc == 1
    assert "net build failed" in capsys.readouterr().err
    assert not (out / "net.csv").exists()


def test_compare_single_spacing_report(tmp_path, capsys):
    out = tmp_path / "cmp"
    rc = cli.main(["compare", "--preset", "gear", "--dt", "0.05",
                   "--delta", "0.1", "--out", str(out)])
    assert rc == 0
    with open(out / "compare.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    assert set(row) == {"dt", "relaxed_objective", "solve_ms", "nearest_cost",
                        "nearest_tv", "nearest_ms", "baseline_cost",
                        "baseline_tv", "baseline_ms"}
    assert float(row["relaxed_objective"]) == pytest.approx(
        GEAR_DT05_OPTIMUM, abs=1e-5)
    # simulated costs use the refined-grid integrator, so they may land on
    # either side of the coarse relaxed optimum; just require sane numbers
    assert math.isfinite(float(row["nearest_cost"]))
    assert math.isfinite(float(row["baseline_cost"]))
    assert float(row["nearest_tv"]) >= 0.0
    assert float(row["baseline_tv"]) >= 0.0
    md = (out / "compare.md").read_text()
    assert "| dt | relaxed objective |" in md
    assert "stand-in" in md
    assert "dt=0.05" in capsys.readouterr().out


def test_check_gear_all_invariants_pass(tmp_path, capsys):
    out = tmp_path / "chk"
    rc = cli.main(["check", "--preset", "gear", "--out", str(out)])
    captured = capsys.readouterr()
    assert rc == 0
    report = read_json(out / "check_report.json")
    assert report["ok"] is True
    names = [c["name"] for c in report["checks"]]
    assert names == ["conjugate-dichotomy", "biconjugacy",
                     "delta-net packing", "delta-net covering",
                     "penalty-sweep monotonicity", "net-gap trend"]
    assert all(c["ok"] for c in report["checks"])
    assert captured.out.count("[pass]") == len(names)


def test_check_names_first_failing_invariant(tmp_path, capsys):
    config = write_ini(tmp_path, RAMP_FILE)
    good = netmod.uniform_net(cli._problem_for(
        RunConfig(source=config, is_preset=False)).controls, 0.3)
    net_path = tmp_path / "net.csv"
    netmod.save_net(good, str(net_path))
    with open(net_path) as fh:
        lines = fh.read().splitlines()
    lines.append(lines[-1])  # duplicate point, breaks the packing half
    net_path.write_text("\n".join(lines) + "\n")

    out = tmp_path / "chk"
    rc = cli.main(["check", "--config", config, "--delta", "0.3",
                   "--net", str(net_path), "--out", str(out)])
    captured = capsys.readouterr()
    assert rc == 1
    assert "invariant failed: delta-net packing" in captured.err
    report = read_json(out / "check_report.json")
    by_name = {c["name"]: c for c in report["checks"]}
    assert not report["ok"]
    assert not by_name["delta-net packing"]["ok"]
    assert by_name["conjugate-dichotomy"]["ok"]
    assert by_name["biconjugacy"]["ok"]


def test_check_penalty_rejects_nonincreasing_eps():
    cfg = RunConfig(source="gear", is_preset=True, dt=0.05, eps=[0.1, 0.1])
    with pytest.raises(ConfigError, match="decreasing"):
        cli._check_penalty(cfg)
    cfg = RunConfig(source="gear", is_preset=True, dt=0.05, eps=[0.1])
    with pytest.raises(ConfigError, match="two"):
        cli._check_penalty(cfg)


def test_conjugate_eval_single_point(tmp_path):
    out = tmp_path / "ce"
    rc = cli.main(["conjugate-eval", "--preset", "gear",
                   "--b", "0 -0.1 0 0.11", "--out", str(out)])
    assert rc == 0
    with open(out / "conjugate_values.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["finite"] == "1"
    assert float(rows[0]["value"]) == pytest.approx(
        5.0 * -0.1 + 9.0 * 0.11, abs=1e-6)


def test_conjugate_eval_point_file_marks_unreachable(tmp_path):
    b_file = tmp_path / "points.csv"
    b_file.write_text("b1,b2,b3,b4\n0,-0.1,0,0.11\n0,0,0,0.5\n")
    out = tmp_path / "ce"
    rc = cli.main(["conjugate-eval", "--preset", "gear",
                   "--b-file", str(b_file), "--out", str(out)])
    assert rc == 0
    with open(out / "conjugate_values.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["finite"] for r in rows] == ["1", "0"]
    assert rows[1]["value"] == "inf"


def test_conjugate_eval_rejects_bad_point(tmp_path, capsys):
    rc = cli.main(["conjugate-eval", "--preset", "gear", "--b", "0 0",
                   "--out", str(tmp_path)])
    assert rc == 2
    assert "components" in capsys.readouterr().err

    rc = cli.main(["conjugate-eval", "--preset", "gear",
                   "--out", str(tmp_path)])
    assert rc == 2
