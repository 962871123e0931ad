"""Command-line entry point: solves, syntheses, comparisons, self-checks.

Subcommands: solve, synthesize, compare, check, conjugate-eval, net-build.
Exit codes: 0 success, 1 solve or invariant failure, 2 configuration error.
All trajectory data goes to CSV (comma separated, '.' decimal, header row,
LF endings); machine summaries go to JSON.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from . import conjugate, lax, net as netmod, sim, synth
from .config import ConfigError, load_problem, load_run_options, preset_problem, steps_for
from .model import Problem, TimeGrid

__all__ = ["RunConfig", "main", "cmd_solve", "cmd_synthesize", "cmd_compare",
           "cmd_check", "cmd_conjugate_eval", "cmd_net_build"]

COMPARE_DELTAS = (0.05, 0.02, 0.01)
DEFAULT_EPS_SWEEP = (1.0, 0.1, 0.01, 0.001)
TREND_DELTAS = (0.2, 0.1, 0.05, 0.02)


@dataclasses.dataclass
class RunConfig:
    """Resolved invocation: problem source plus run parameters."""

    source: str                   # config file path or preset name
    is_preset: bool
    dt: Optional[float] = None
    delta: float = 0.02
    mode: str = "hard"
    eps: Optional[List[float]] = None
    method: str = "nearest"
    out: str = "out"
    seed: int = 0
    net_path: Optional[str] = None

    def echo(self) -> Dict:
        return dataclasses.asdict(self)


def _build_config(args) -> RunConfig:
    if args.config:
        source, is_preset = args.config, False
        defaults = load_run_options(args.config)
    elif args.preset:
        source, is_preset = args.preset, True
        defaults = {}
    else:
        raise ConfigError("need --preset <name> or --config <path>")

    def pick(flag, key, cast, fallback):
        if flag is not None:
            return flag
        if key in defaults:
            return cast(defaults[key])
        return fallback

    eps = args.eps if hasattr(args, "eps") else None
    if eps is None and "eps" in defaults:
        eps = defaults["eps"]
    cfg = RunConfig(
        source=source,
        is_preset=is_preset,
        dt=pick(getattr(args, "dt", None), "dt", float, None),
        delta=pick(getattr(args, "delta", None), "delta", float, 0.02),
        mode=pick(getattr(args, "mode", None), "mode", str, "hard"),
        eps=_parse_eps(eps),
        method=pick(getattr(args, "method", None), "method", str, "nearest"),
        out=pick(getattr(args, "out", None), "out", str, "out"),
        seed=pick(getattr(args, "seed", None), "seed", int, 0),
        net_path=getattr(args, "net", None),
    )
    if cfg.delta <= 0:
        raise ConfigError("delta must be positive")
    if cfg.mode not in lax.MODES:
        raise ConfigError(f"mode must be one of {lax.MODES}")
    if cfg.method not in synth.METHODS:
        raise ConfigError(f"method must be one of {synth.METHODS}")
    return cfg


def _parse_eps(raw) -> Optional[List[float]]:
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        return [float(raw)]
    try:
        vals = [float(tok) for tok in str(raw).replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"bad eps list {raw!r}") from None
    if not vals:
        raise ConfigError("empty eps list")
    return vals


def _problem_for(cfg: RunConfig, dt: Optional[float] = None) -> Problem:
    dt = dt if dt is not None else cfg.dt
    if cfg.is_preset:
        problem = preset_problem(cfg.source)
    else:
        problem = load_problem(cfg.source)
    if dt is not None:
        steps = steps_for(problem.grid.t0, problem.grid.t_end, dt)
        problem = Problem(dynamics=problem.dynamics, cost=problem.cost,
                          controls=problem.controls,
                          grid=TimeGrid.uniform(problem.grid.t0,
                                                problem.grid.t_end, steps),
                          x0=problem.x0, constraint=problem.constraint,
                          name=problem.name)
    return problem


def _net_for(problem: Problem, cfg: RunConfig) -> netmod.DeltaNet:
    if cfg.net_path:
        return netmod.load_net(cfg.net_path, cfg.delta)
    try:
        return netmod.uniform_net(problem.controls, cfg.delta)
    except netmod.NetBuildError:
        return netmod.build(problem.controls, cfg.delta)


def _single_eps(cfg: RunConfig) -> Optional[float]:
    if cfg.mode != "penalty":
        return None
    if cfg.eps is None:
        raise ConfigError("penalty mode needs --eps <value>")
    if len(cfg.eps) != 1:
        raise ConfigError("penalty solve takes a single eps value")
    if cfg.eps[0] <= 0:
        raise ConfigError("eps must be positive")
    return cfg.eps[0]


def _write_json(path: str, payload: Dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solve(problem: Problem, cfg: RunConfig):
    t0 = time.perf_counter()
    sol = lax.solve_lax(problem, mode=cfg.mode, eps=_single_eps(cfg))
    wall_ms = 1000.0 * (time.perf_counter() - t0)
    return sol, wall_ms


def cmd_solve(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    summary_path = os.path.join(cfg.out, "summary.json")
    problem = _problem_for(cfg)
    try:
        sol, wall_ms = _solve(problem, cfg)
    except lax.InfeasibleProblem as exc:
        _write_json(summary_path, {"error": {"kind": "infeasible",
                                             "message": str(exc)},
                                   "config": cfg.echo()})
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1
    lax.save_solution(sol, os.path.join(cfg.out, "lax_solution.csv"))
    summary = {
        "objective": sol.objective,
        "status": sol.report.status,
        "iterations": sol.report.iterations,
        "wall_ms": wall_ms,
        "config": cfg.echo(),
    }
    _write_json(summary_path, summary)
    if sol.report.status != "Optimal":
        print(f"solver stopped with status {sol.report.status}", file=sys.stderr)
        return 1
    print(f"objective {sol.objective:.6f}  ({sol.report.status}, "
          f"{sol.report.iterations} iterations, {wall_ms:.0f} ms)")
    return 0


def cmd_synthesize(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    problem = _problem_for(cfg)
    sol_path = os.path.join(cfg.out, "lax_solution.csv")
    if os.path.exists(sol_path):
        sol = lax.load_solution(sol_path)
        if sol.grid.steps != problem.grid.steps:
            raise ConfigError(
                f"existing {sol_path} has {sol.grid.steps} steps but the "
                f"problem grid has {problem.grid.steps}; delete it or match --dt")
    else:
        sol, _ = _solve(problem, cfg)
        lax.save_solution(sol, sol_path)
    delta_net = _net_for(problem, cfg)
    result = synth.synthesize(problem, sol, delta_net, method=cfg.method)
    sim.save_control(os.path.join(cfg.out, "control.csv"), result.control)
    sim.save_trajectory(os.path.join(cfg.out, "sim_trajectory.csv"),
                        result.control, result.x_sim)
    _write_json(os.path.join(cfg.out, "metrics.json"), {
        "total_cost": result.metrics.total_cost,
        "control_tv": result.metrics.control_tv,
        "max_constraint_violation": result.metrics.max_constraint_violation,
        "tracking_error": result.metrics.tracking_error,
        "method": cfg.method,
        "delta": delta_net.delta,
        "net_size": delta_net.size,
        "config": cfg.echo(),
    })
    print(f"{cfg.method}: cost {result.metrics.total_cost:.6f}, "
          f"switching variation {result.metrics.control_tv:.3f}, "
          f"worst constraint overshoot {result.metrics.max_constraint_violation:.2e}")
    return 0


BASELINE_NOTE = (
    "The baseline column is a stand-in, not the original prior controller: "
    "that method's interpolation internals are unpublished, so this table "
    "realizes the relaxed vertex mixture by time-proportional chattering "
    "instead. It is expected to land within 5% of the relaxed objective and "
    "to switch at least as often as the nearest-vertex controller."
)


def cmd_compare(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    dts = [cfg.dt] if cfg.dt is not None else list(COMPARE_DELTAS)
    rows = []
    for dt in dts:
        problem = _problem_for(cfg, dt=dt)
        sol, wall_ms = _solve(problem, cfg)
        delta_net = _net_for(problem, cfg)
        row = {"dt": dt, "relaxed_objective": sol.objective,
               "solve_ms": wall_ms}
        for method in ("nearest", "baseline"):
            t0 = time.perf_counter()
            result = synth.synthesize(problem, sol, delta_net, method=method)
            ms = 1000.0 * (time.perf_counter() - t0)
            row[f"{method}_cost"] = result.metrics.total_cost
            row[f"{method}_tv"] = result.metrics.control_tv
            row[f"{method}_ms"] = ms
        rows.append(row)

    fields = ["dt", "relaxed_objective", "solve_ms", "nearest_cost",
              "nearest_tv", "nearest_ms", "baseline_cost", "baseline_tv",
              "baseline_ms"]
    with open(os.path.join(cfg.out, "compare.csv"), "w", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(float(row[k]))
                             if isinstance(row[k], float)
                             else row[k] for k in fields})

    lines = [
        "# Method comparison",
        "",
        "Total cost and wall time per grid spacing; the relaxed objective is",
        "the optimum of the convexified program, the method columns are",
        "simulated costs of the reconstructed admissible controllers.",
        "",
        "| dt | relaxed objective | solve ms | nearest cost | nearest switch var | baseline cost | baseline switch var |",
        "|---:|---:|---:|---:|---:|---:|---:|",
    ]
    for row in rows:
        lines.append(
            f"| {row['dt']:g} | {row['relaxed_objective']:.4f} "
            f"| {row['solve_ms']:.0f} | {row['nearest_cost']:.4f} "
            f"| {row['nearest_tv']:.3f} | {row['baseline_cost']:.4f} "
            f"| {row['baseline_tv']:.3f} |")
    lines += ["", BASELINE_NOTE, ""]
    with open(os.path.join(cfg.out, "compare.md"), "w", newline="\n") as fh:
        fh.write("\n".join(lines))
    for row in rows:
        print(f"dt={row['dt']:g}: relaxed {row['relaxed_objective']:.4f}, "
              f"nearest {row['nearest_cost']:.4f}, "
              f"baseline {row['baseline_cost']:.4f}")
    return 0


def _check_dichotomy(problem: Problem, rng) -> Dict:
    hull = conjugate.control_image_hull(problem, problem.grid.t0)
    lo = hull.vertices.min(axis=0) - 0.3
    hi = hull.vertices.max(axis=0) + 0.3
    points = rng.uniform(lo, hi, size=(200, hull.dim))
    # seed some guaranteed members: random convex combinations of vertices
    weights = rng.dirichlet(np.ones(hull.size), size=100)
    points = np.vstack([points, weights @ hull.vertices])
    mismatches = 0
    for b in points:
        val = conjugate.hstar(hull, b)
        dist = conjugate.hull_distance(hull, b)
        member = dist <= 1e-7 * max(1.0, float(np.max(np.abs(hull.vertices))))
        if member != val.finite:
            mismatches += 1
    return {"name": "conjugate-dichotomy", "ok": mismatches == 0,
            "samples": len(points), "mismatches": mismatches}


def _check_biconjugacy(problem: Problem, rng) -> Dict:
    hull = conjugate.control_image_hull(problem, problem.grid.t0)
    table = conjugate.BiconjugateTable(hull, density=33)
    worst = 0.0
    for _ in range(100):
        p = rng.normal(scale=3.0, size=hull.dim)
        direct = conjugate.hamiltonian(hull, p)
        via_table = table.evaluate(p)
        bound = 2.0 * table.resolution * float(np.linalg.norm(p)) + 1e-6
        worst = max(worst, abs(via_table - direct) - bound)
    return {"name": "biconjugacy", "ok": worst <= 0.0,
            "worst_excess": worst}


def _check_net(problem: Problem, cfg: RunConfig) -> List[Dict]:
    if cfg.net_path:
        delta_net = netmod.load_net(cfg.net_path, cfg.delta)
    else:
        delta_net = _net_for(problem, cfg)
    report = netmod.verify(problem.controls, delta_net)
    return [
        {"name": "delta-net packing", "ok": report.packing_ok,
         "min_pairwise": report.min_pairwise, "delta": delta_net.delta},
        {"name": "delta-net covering", "ok": report.covering_ok,
         "max_probe_gap": report.max_probe_gap, "delta": delta_net.delta},
    ]


def _check_penalty(cfg: RunConfig) -> Dict:
    eps_values = cfg.eps if cfg.eps is not None else list(DEFAULT_EPS_SWEEP)
    if len(eps_values) < 2:
        raise ConfigError("penalty sweep needs at least two eps values")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ConfigError("eps list must be strictly decreasing")
    problem = _problem_for(cfg, dt=cfg.dt if cfg.dt is not None else 0.05)
    entries = lax.penalty_sweep(problem, eps_values)
    objectives = [e.objective for e in entries]
    monotone = all(b >= a - 1e-6 for a, b in zip(objectives, objectives[1:]))
    return {"name": "penalty-sweep monotonicity", "ok": monotone,
            "eps": eps_values, "objectives": objectives}


def _check_trend(cfg: RunConfig) -> Dict:
    gaps, deltas = [], []
    for delta in TREND_DELTAS:
        problem = _problem_for(cfg, dt=delta / 2.0)
        sol, _ = _solve(problem, dataclasses.replace(cfg, mode="hard"))
        delta_net = _net_for(problem, dataclasses.replace(
            cfg, delta=delta, net_path=None))
        control = synth.nearest_vertex(problem, sol, delta_net)
        x_euler = sim.integrate(problem, control, substeps=1, method="euler")
        cost = sim.evaluate_cost(problem, control, x_euler)
        gaps.append(abs(cost - sol.objective))
        deltas.append(delta)
    darr, garr = np.array(deltas), np.array(gaps)
    c = float(np.sum(garr * darr) / np.sum(darr ** 2))
    ok = c > 0 and bool(np.all(garr <= 1.5 * c * darr))
    return {"name": "net-gap trend", "ok": ok, "fit_c": c,
            "deltas": deltas, "gaps": gaps}


def cmd_check(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    problem = _problem_for(cfg)
    checks: List[Dict] = []
    checks.append(_check_dichotomy(problem, rng))
    checks.append(_check_biconjugacy(problem, rng))
    checks.extend(_check_net(problem, cfg))
    checks.append(_check_penalty(cfg))
    checks.append(_check_trend(cfg))
    ok = all(c["ok"] for c in checks)
    _write_json(os.path.join(cfg.out, "check_report.json"),
                {"ok": ok, "checks": checks, "config": cfg.echo()})
    for c in checks:
        print(f"[{'pass' if c['ok'] else 'FAIL'}] {c['name']}")
    if not ok:
        failed = next(c["name"] for c in checks if not c["ok"])
        print(f"invariant failed: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_conjugate_eval(cfg: RunConfig, args) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    problem = _problem_for(cfg)
    t = args.t if args.t is not None else problem.grid.t0
    x = (np.array([float(v) for v in args.x.split()])
         if args.x else problem.x0)
    if x.size != problem.n:
        raise ConfigError(f"x needs {problem.n} components")
    if args.b is None and args.b_file is None:
        raise ConfigError("need --b <components> or --b-file <csv>")
    if args.b is not None:
        b_rows = np.array([[float(v) for v in args.b.split()]])
    else:
        with open(args.b_file, newline="") as fh:
            rows = list(csv.reader(fh))
        start = 1 if rows and not _is_number_row(rows[0]) else 0
        b_rows = np.array([[float(v) for v in row] for row in rows[start:]])
    if b_rows.shape[1] != problem.n:
        raise ConfigError(f"b rows need {problem.n} components")

    hull = conjugate.sample_hull(problem, t, x)
    out_path = os.path.join(cfg.out, "conjugate_values.csv")
    with open(out_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"b{i+1}" for i in range(problem.n)]
                        + ["finite", "value"])
        for b in b_rows:
            val = conjugate.hstar(hull, b)
            writer.writerow([repr(float(v)) for v in b]
                            + [int(val.finite),
                               repr(val.value) if val.finite else "inf"])
            shown = f"{val.value:.9g}" if val.finite else "inf"
            print(f"b={np.array2string(b, precision=6)}: {shown}")
    return 0


def _is_number_row(row) -> bool:
    try:
        [float(v) for v in row]
        return True
    except ValueError:
        return False


def cmd_net_build(cfg: RunConfig, args) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    problem = _problem_for(cfg)
    try:
        if args.uniform is not None:
            delta_net = netmod.uniform_net(problem.controls, cfg.delta,
                                           per_interval=args.uniform)
        else:
            delta_net = netmod.build(problem.controls, cfg.delta)
    except netmod.NetBuildError as exc:
        print(f"net build failed: {exc}", file=sys.stderr)
        return 1
    report = netmod.verify(problem.controls, delta_net)
    netmod.save_net(delta_net, os.path.join(cfg.out, "net.csv"))
    _write_json(os.path.join(cfg.out, "net_report.json"), {
        "ok": report.ok, "packing_ok": report.packing_ok,
        "covering_ok": report.covering_ok,
        "min_pairwise": report.min_pairwise,
        "max_probe_gap": report.max_probe_gap,
        "size": delta_net.size, "delta": delta_net.delta,
        "config": cfg.echo(),
    })
    print(f"net of {delta_net.size} points at delta={delta_net.delta:g} "
          f"(packing {report.min_pairwise:.4g}, cover gap {report.max_probe_gap:.4g})")
    return 0 if report.ok else 1


def _add_common(sub, *, dt=True, delta=True, mode=True, eps=True,
                method=True, net=False):
    sub.add_argument("--preset", help="builtin problem name (e.g. gear)")
    sub.add_argument("--config", help="problem config file path")
    if dt:
        sub.add_argument("--dt", type=float, help="uniform grid spacing")
    if delta:
        sub.add_argument("--delta", type=float, help="net spacing parameter")
    if mode:
        sub.add_argument("--mode", choices=list(lax.MODES),
                         help="state constraint handling")
    if eps:
        sub.add_argument("--eps", help="penalty weight, or a decreasing list "
                                       "for sweeps (comma separated)")
    if method:
        sub.add_argument("--method", choices=list(synth.METHODS),
                         help="control reconstruction method")
    if net:
        sub.add_argument("--net", help="existing net CSV to use/verify")
    sub.add_argument("--out", help="output directory (default ./out)")
    sub.add_argument("--seed", type=int, help="seed for randomized checks")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laxopt",
        description="Finite-horizon optimal control via convexified "
                    "velocity programs and net-based control reconstruction.")
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser(
        "solve", help="solve the relaxed trajectory program"), method=False)
    _add_common(subs.add_parser(
        "synthesize", help="reconstruct an admissible controller"), net=True)
    _add_common(subs.add_parser(
        "compare", help="table of methods across grid spacings"))
    _add_common(subs.add_parser(
        "check", help="run the invariant self-test suite"), net=True)

    ce = subs.add_parser("conjugate-eval",
                         help="evaluate the velocity conjugate at points")
    _add_common(ce, dt=True, delta=False, mode=False, eps=False, method=False)
    ce.add_argument("--t", type=float, help="time (default grid start)")
    ce.add_argument("--x", help="state components (default x0)")
    ce.add_argument("--b", help="single velocity point components")
    ce.add_argument("--b-file", help="CSV of velocity points, one per row")

    nb = subs.add_parser("net-build", help="build and verify a control net")
    _add_common(nb, dt=False, mode=False, eps=False, method=False)
    nb.add_argument("--uniform", type=int,
                    help="points per interval factor for a uniform net")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "synthesize":
            return cmd_synthesize(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "conjugate-eval":
            return cmd_conjugate_eval(cfg, args)
        if args.command == "net-build":
            return cmd_net_build(cfg, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except lax.InfeasibleProblem as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
