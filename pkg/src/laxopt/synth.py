"""Admissible-control reconstruction from relaxed trajectories.

Three constructions are provided. Nearest-vertex picks, per step, the net
control whose velocity best cancels the relaxed step direction. The
simple-function map rounds an arbitrary admissible control to the net by
first-covering-ball membership. The interpolation baseline realizes the
relaxed vertex mixture literally, chattering through the active generators
within each step; it exists as the comparison method and is expected to
switch far more often.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .conjugate import HullModel, control_image_hull
from .lax import LaxSolution
from .model import Problem, TimeGrid
from .net import DeltaNet
from . import sim
from .sim import ControlTrajectory, MetricSet

__all__ = [
    "ControlTrajectory",
    "SynthesisResult",
    "UncoveredPoint",
    "nearest_vertex",
    "simple_function",
    "baseline_interpolation",
    "dominant_generator",
    "synthesize",
    "METHODS",
]

METHODS = ("nearest", "simple", "baseline")


class UncoveredPoint(RuntimeError):
    """A control point lies outside every net ball (invalid covering)."""


@dataclass(frozen=True)
class SynthesisResult:
    """A reconstructed control with its simulated run.

    x_sim comes from sim.integrate under `control` starting at the problem's
    x0; metrics are measured against the relaxed state trajectory.
    """

    control: ControlTrajectory
    x_sim: np.ndarray
    total_cost: float
    metrics: MetricSet


def _net_velocities(problem: Problem, t: float, net: DeltaNet) -> np.ndarray:
    """Rows h(t, a_i) for every net point a_i."""
    return np.array([problem.dynamics.h(t, a) for a in net.points])


def nearest_vertex(problem: Problem, sol: LaxSolution, net: DeltaNet,
                   closed_loop: bool = False,
                   substeps: int = 4) -> ControlTrajectory:
    """Per step, the net control whose velocity best cancels the step.

    Picks u[k] minimizing the Euclidean norm of beta[k] + f(t_k, x[k], u)
    over the net, ties broken by lowest net index. By default x[k] is the
    relaxed state (open loop); with closed_loop=True the distance uses the
    state simulated under the controls chosen so far.
    """
    grid = sol.grid
    K = grid.steps
    A = problem.dynamics.A
    u_rows = np.empty((K, problem.m))
    x_loop = problem.x0.astype(float).copy()
    for k in range(K):
        t_k = float(grid.knots[k])
        x_k = x_loop if closed_loop else sol.x_traj[k]
        drift = sol.beta_traj[k] + A @ x_k
        resid = drift[None, :] + _net_velocities(problem, t_k, net)
        u_rows[k] = net.points[int(np.argmin(np.linalg.norm(resid, axis=1)))]
        if closed_loop:
            dt = grid.deltas[k] / substeps
            a_k = u_rows[k]
            for j in range(substeps):
                x_loop = sim._rk4_step(
                    lambda t, y: problem.dynamics.f(t, y, a_k),
                    t_k + j * dt, x_loop, dt)
    return ControlTrajectory(grid=grid, u=u_rows)


def simple_function(problem: Problem, u_continuous: ControlTrajectory,
                    net: DeltaNet) -> ControlTrajectory:
    """Round each control point to the first net ball containing it.

    Balls are taken in net order with radius net.delta, earlier balls
    claiming overlap regions, so the output is a deterministic net-valued
    control within delta of the input everywhere.
    """
    pts = net.points
    out = np.empty_like(np.atleast_2d(u_continuous.u))
    for k, u_k in enumerate(u_continuous.u):
        dists = np.linalg.norm(pts - u_k[None, :], axis=1)
        inside = np.flatnonzero(dists <= net.delta + 1e-12)
        if inside.size == 0:
            raise UncoveredPoint(
                f"control point {u_k.tolist()} at step {k} lies outside every "
                f"net ball of radius {net.delta}")
        out[k] = pts[inside[0]]
    return ControlTrajectory(grid=u_continuous.grid, u=out)


def dominant_generator(problem: Problem, sol: LaxSolution) -> ControlTrajectory:
    """Per step, the generator control of the heaviest-weighted vertex.

    Admissible by construction (generators are control-set points) though
    not necessarily net-valued; the usual next stop is simple_function.
    """
    hulls = _resolve_hulls(problem, sol)
    u_rows = np.empty((sol.grid.steps, problem.m))
    for k in range(sol.grid.steps):
        idx = int(np.argmax(sol.gamma_traj[k]))
        u_rows[k] = hulls[k].generator_controls[idx]
    return ControlTrajectory(grid=sol.grid, u=u_rows)


def _snap_to_net(a: np.ndarray, net: DeltaNet) -> np.ndarray:
    d = np.linalg.norm(net.points - a[None, :], axis=1)
    return net.points[int(np.argmin(d))]


def _resolve_hulls(problem: Problem, sol: LaxSolution) -> List[HullModel]:
    if sol.hulls is not None:
        return list(sol.hulls)
    return [control_image_hull(problem, float(sol.grid.knots[k]))
            for k in range(sol.grid.steps)]


def baseline_interpolation(problem: Problem, sol: LaxSolution, net: DeltaNet,
                           active_tol: float = 1e-9) -> ControlTrajectory:
    """Chattering realization of the relaxed vertex mixture.

    Each step [t_k, t_{k+1}) is subdivided proportionally to the active
    weights gamma[k][i] and the generator control of each active vertex is
    applied on its sub-interval (snapped to the nearest net point, ties by
    lowest index). The result lives on a refined grid with one sub-interval
    per active vertex.
    """
    hulls = _resolve_hulls(problem, sol)
    knots: List[float] = [float(sol.grid.knots[0])]
    u_rows: List[np.ndarray] = []
    for k in range(sol.grid.steps):
        gamma = np.asarray(sol.gamma_traj[k], dtype=float)
        active = np.flatnonzero(gamma > active_tol)
        if active.size == 0:
            active = np.array([int(np.argmax(gamma))])
        weights = gamma[active] / gamma[active].sum()
        t_lo = float(sol.grid.knots[k])
        t_hi = float(sol.grid.knots[k + 1])
        frac = 0.0
        for idx, w in zip(active, weights):
            u_rows.append(_snap_to_net(hulls[k].generator_controls[idx], net))
            frac += w
            knots.append(t_lo + frac * (t_hi - t_lo))
        knots[-1] = t_hi  # land exactly on the knot despite rounding
    grid = TimeGrid(np.array(knots))
    return ControlTrajectory(grid=grid, u=np.array(u_rows))


def synthesize(problem: Problem, sol: LaxSolution, net: DeltaNet,
               method: str = "nearest", closed_loop: bool = False,
               substeps: int = 4) -> SynthesisResult:
    """Run one reconstruction method and simulate its trajectory.

    Tracking error is measured against the relaxed states at shared knots;
    the baseline's refined grid contains the relaxed knots, so comparison
    happens at the coarse knots in every case.
    """
    if method == "nearest":
        control = nearest_vertex(problem, sol, net, closed_loop=closed_loop,
                                 substeps=substeps)
    elif method == "simple":
        control = simple_function(problem, dominant_generator(problem, sol), net)
    elif method == "baseline":
        control = baseline_interpolation(problem, sol, net)
    else:
        raise ValueError(f"unknown synthesis method {method!r}; "
                         f"expected one of {METHODS}")
    sim_problem = problem
    if control.grid.steps != problem.grid.steps:
        sim_problem = Problem(grid=control.grid, controls=problem.controls,
                              dynamics=problem.dynamics, cost=problem.cost,
                              constraint=problem.constraint, x0=problem.x0)
    x_sim = sim.integrate(sim_problem, control, substeps=substeps)
    x_ref = _reference_at(control.grid, sol)
    mset = sim.metrics(sim_problem, control, x_sim, x_ref=x_ref)
    return SynthesisResult(control=control, x_sim=x_sim,
                           total_cost=mset.total_cost, metrics=mset)


def _reference_at(grid: TimeGrid, sol: LaxSolution) -> np.ndarray:
    """Relaxed states interpolated onto `grid` (linear between knots)."""
    ref = np.empty((grid.steps + 1, sol.x_traj.shape[1]))
    for j in range(sol.x_traj.shape[1]):
        ref[:, j] = np.interp(grid.knots, sol.grid.knots, sol.x_traj[:, j])
    return ref
