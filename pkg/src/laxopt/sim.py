"""Forward simulation of the true dynamics plus run-quality metrics.

Controls are piecewise constant on the knot intervals of a time grid; the
integrator is classical 4th-order with a fixed number of sub-steps per
interval. For nilpotent linear parts (index <= 4) the flow under a constant
control is polynomial of degree <= 3 in time, so the integration is exact
there. Cost evaluation uses the left-endpoint rule, the same quadrature as
the relaxed program, so simulated and relaxed objectives are directly
comparable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .model import Problem, TimeGrid

__all__ = [
    "ControlTrajectory",
    "MetricSet",
    "integrate",
    "evaluate_cost",
    "control_variation",
    "metrics",
    "save_trajectory",
    "load_trajectory",
    "save_control",
    "load_control",
]


@dataclass(frozen=True)
class ControlTrajectory:
    """Piecewise-constant control: u[k] applied on [t_k, t_{k+1}).

    Attributes
    ----------
    grid : TimeGrid
        Knot sequence with K intervals.
    u : ndarray, shape (K, m)
        One control point per interval.
    """

    grid: TimeGrid
    u: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if self.grid.steps == 0:
            u = u.reshape(0, u.shape[1] if u.size else 0)
        if u.shape[0] != self.grid.steps:
            raise ValueError(
                f"control has {u.shape[0]} rows for {self.grid.steps} intervals")
        object.__setattr__(self, "u", u)

    @property
    def m(self) -> int:
        return self.u.shape[1]

    def admissible(self, controls, tol: float = 1e-9) -> bool:
        """Whether every control point lies in the given control set."""
        return all(controls.contains(row, tol=tol) for row in self.u)

    def in_net(self, net, tol: float = 1e-9) -> bool:
        """Whether every control point coincides with some net point."""
        if self.u.shape[0] == 0:
            return True
        d = np.linalg.norm(self.u[:, None, :] - net.points[None, :, :], axis=2)
        return bool(np.all(d.min(axis=1) <= tol))


@dataclass(frozen=True)
class MetricSet:
    """Quality summary of a simulated run.

    total_cost is the left-endpoint running cost plus terminal cost;
    control_tv sums the 1-norms of consecutive control jumps (chattering
    proxy); max_constraint_violation is the worst knot overshoot of the
    state constraint; tracking_error is the largest knot distance to a
    reference trajectory.
    """

    total_cost: float
    control_tv: float
    max_constraint_violation: float
    tracking_error: float


ControlLike = Union[ControlTrajectory, Callable[[float], np.ndarray]]


def _rk4_step(field, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = field(t, x)
    k2 = field(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = field(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = field(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(problem: Problem, control: ControlLike, substeps: int = 4,
              method: str = "rk4") -> np.ndarray:
    """Integrate the dynamics from problem.x0, one row of states per knot.

    `control` is either a ControlTrajectory on problem.grid (held constant
    per interval) or a callable t -> control point (sampled at the
    integrator's stage times; useful for smooth-control convergence
    studies). `method` is "rk4" (default) or "euler"; the forward-Euler
    variant with substeps=1 reproduces the relaxed program's step equation
    exactly, which is what makes simulated and relaxed costs comparable
    without integrator bias. Returns a (K+1, n) array.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown integration method {method!r}")
    grid = problem.grid
    if isinstance(control, ControlTrajectory):
        if control.grid.steps != grid.steps or not np.allclose(
                control.grid.knots, grid.knots):
            raise ValueError("control grid does not match problem grid")
    dyn = problem.dynamics
    out = np.empty((grid.steps + 1, problem.n))
    out[0] = problem.x0
    x = problem.x0.astype(float).copy()
    for k in range(grid.steps):
        t_k = grid.knots[k]
        dt = grid.deltas[k] / substeps
        if isinstance(control, ControlTrajectory):
            a_k = control.u[k]
            field = lambda t, y: dyn.f(t, y, a_k)
        else:
            field = lambda t, y: dyn.f(t, y, np.asarray(control(t), dtype=float))
        for j in range(substeps):
            if method == "rk4":
                x = _rk4_step(field, t_k + j * dt, x, dt)
            else:
                x = x + dt * field(t_k + j * dt, x)
        out[k + 1] = x
    return out


def evaluate_cost(problem: Problem, control: ControlTrajectory,
                  x_sim: np.ndarray) -> float:
    """Left-endpoint running cost along x_sim plus terminal cost."""
    grid = problem.grid
    x_sim = np.asarray(x_sim, dtype=float)
    cost = 0.0
    for k in range(grid.steps):
        t_k = grid.knots[k]
        cost += (problem.cost.stage_state(t_k, x_sim[k])
                 + problem.cost.stage_control(t_k, control.u[k])) * grid.deltas[k]
    return float(cost + problem.cost.terminal(x_sim[grid.steps]))


def control_variation(u: np.ndarray) -> float:
    """Sum of 1-norm jumps between consecutive control points."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] < 2:
        return 0.0
    return float(np.sum(np.abs(np.diff(u, axis=0))))


def metrics(problem: Problem, control: ControlTrajectory, x_sim: np.ndarray,
            x_ref: Optional[np.ndarray] = None) -> MetricSet:
    """Collect cost, chattering, feasibility, and tracking numbers."""
    x_sim = np.asarray(x_sim, dtype=float)
    violation = 0.0
    if problem.constraint is not None:
        violation = max((problem.constraint.violation(row) for row in x_sim),
                        default=0.0)
    tracking = 0.0
    if x_ref is not None:
        x_ref = np.asarray(x_ref, dtype=float)
        if x_ref.shape != x_sim.shape:
            raise ValueError("reference trajectory shape mismatch")
        diffs = np.linalg.norm(x_sim - x_ref, axis=1)
        tracking = float(np.max(diffs, initial=0.0))
    return MetricSet(
        total_cost=evaluate_cost(problem, control, x_sim),
        control_tv=control_variation(control.u),
        max_constraint_violation=float(violation),
        tracking_error=tracking,
    )


def save_trajectory(path: str, control: ControlTrajectory,
                    x_sim: np.ndarray) -> None:
    """Write knot rows t, x1..xn, u1..um; the final knot has empty u cells."""
    x_sim = np.asarray(x_sim, dtype=float)
    K = control.grid.steps
    n = x_sim.shape[1]
    m = control.m
    header = (["t"] + [f"x{i+1}" for i in range(n)]
              + [f"u{i+1}" for i in range(m)])
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(K + 1):
            cells = [repr(float(control.grid.knots[k]))]
            cells += [repr(float(v)) for v in x_sim[k]]
            if k < K:
                cells += [repr(float(v)) for v in control.u[k]]
            else:
                cells += [""] * m
            writer.writerow(cells)


def load_trajectory(path: str):
    """Read a file written by save_trajectory.

    Returns (ControlTrajectory, x_sim).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("u"))
    knots, xs, us = [], [], []
    for i, cells in enumerate(rows[1:]):
        knots.append(float(cells[0]))
        xs.append([float(v) for v in cells[1:1 + n]])
        u_cells = cells[1 + n:1 + n + m]
        if i < len(rows) - 2:
            us.append([float(v) for v in u_cells])
    grid = TimeGrid(np.array(knots))
    control = ControlTrajectory(grid=grid, u=np.array(us).reshape(len(us), m))
    return control, np.array(xs)


def save_control(path: str, control: ControlTrajectory) -> None:
    """Write interval rows t, u1..um (left endpoints only)."""
    header = ["t"] + [f"u{i+1}" for i in range(control.m)]
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(control.grid.steps):
            cells = [repr(float(control.grid.knots[k]))]
            cells += [repr(float(v)) for v in control.u[k]]
            writer.writerow(cells)


def load_control(path: str, t_end: Optional[float] = None) -> ControlTrajectory:
    """Read a file written by save_control.

    The final knot is not stored in the file; pass `t_end` to restore it,
    otherwise the last interval is assumed to repeat the previous length.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    m = sum(1 for h in header if h.startswith("u"))
    knots = [float(cells[0]) for cells in rows[1:]]
    us = [[float(v) for v in cells[1:1 + m]] for cells in rows[1:]]
    if t_end is None:
        if len(knots) >= 2:
            t_end = 2 * knots[-1] - knots[-2]
        else:
            raise ValueError("cannot infer the final knot from a single row")
    grid = TimeGrid(np.array(knots + [float(t_end)]))
    return ControlTrajectory(grid=grid, u=np.array(us).reshape(len(us), m))
