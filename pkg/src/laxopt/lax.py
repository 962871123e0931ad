"""Relaxed trajectory programs built from conjugate hulls.

The value of the control problem is approximated by a finite-dimensional
convex program over knot states x[0..K] and per-step hull weights gamma[k]:
the dynamics rows encode x[k+1] = x[k] + Delta_k (A x[k] + h-mixture), the
weights live on a simplex, and the stage cost is the mixture of vertex costs
plus the encodable state cost. State constraints enter either as hard rows at
every knot or as slack-penalized violations scaled by 1/eps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import convexsolver as cs
from .conjugate import HullModel, control_image_hull
from .model import BoxConstraint, HalfspaceConstraint, Problem, TimeGrid

__all__ = [
    "UnsupportedCost",
    "InfeasibleProblem",
    "AssembledLax",
    "LaxSolution",
    "assemble",
    "solve_lax",
    "relaxed_cost",
    "penalty_sweep",
    "SweepEntry",
    "save_solution",
    "load_solution",
]

MODES = ("hard", "penalty", "unconstrained")


class UnsupportedCost(TypeError):
    """Raised when a cost lacks the affine/diagonal-quadratic encoding."""


class InfeasibleProblem(RuntimeError):
    """Raised when the assembled program is primal infeasible."""


@dataclass
class AssembledLax:
    """A sparse program plus the metadata to interpret its solution."""

    program: cs.SparseConvexProgram
    problem: Problem
    hulls: List[HullModel]
    mode: str
    eps: Optional[float]
    constant: float
    n: int
    gamma_offsets: List[int]
    gamma_sizes: List[int]

    def x_offset(self, k: int) -> int:
        return k * self.n


@dataclass
class LaxSolution:
    grid: TimeGrid
    x_traj: np.ndarray
    beta_traj: np.ndarray
    gamma_traj: List[np.ndarray]
    objective: float
    report: Optional[cs.SolveReport]
    hulls: Optional[List[HullModel]] = None


def _require_forms(problem: Problem):
    if problem.cost.stage_state_form is None or problem.cost.terminal_form is None:
        raise UnsupportedCost(
            "stage-state and terminal costs must carry affine or diagonal-"
            "quadratic encodings to enter the program"
        )
    s_form, g_form = problem.cost.stage_state_form, problem.cost.terminal_form
    if s_form.dim != problem.n or g_form.dim != problem.n:
        raise UnsupportedCost("cost encodings must act on the state dimension")
    return s_form, g_form


def assemble(problem: Problem, mode: str = "hard", eps: Optional[float] = None,
             per_interval: int = 65,
             hulls: Optional[Sequence[HullModel]] = None) -> AssembledLax:
    """Build the sparse convex program for the relaxed trajectory problem.

    Variables are the knot states followed by per-step hull weights (and, in
    penalty mode, nonnegative violation slacks). `eps` is required for penalty
    mode; an infinite `eps` turns the penalty off entirely.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "penalty":
        if eps is None or not (eps > 0):
            raise ValueError("penalty mode needs eps > 0")
    s_form, g_form = _require_forms(problem)

    grid = problem.grid
    K, n = grid.steps, problem.n
    deltas = grid.deltas
    if hulls is None:
        hulls = [control_image_hull(problem, float(grid.knots[k]), per_interval)
                 for k in range(K)]
    else:
        hulls = list(hulls)
        if len(hulls) != K:
            raise ValueError("need one hull per step")

    gamma_sizes = [h.size for h in hulls]
    gamma_offsets = []
    at = (K + 1) * n
    for sz in gamma_sizes:
        gamma_offsets.append(at)
        at += sz
    nvar = at

    rows_i: list = []
    cols_i: list = []
    vals: list = []
    l_list: list = []
    u_list: list = []
    row = 0

    def add_entry(r, c, v):
        rows_i.append(r)
        cols_i.append(c)
        vals.append(v)

    # x[0] = x0
    for j in range(n):
        add_entry(row, j, 1.0)
        l_list.append(problem.x0[j])
        u_list.append(problem.x0[j])
        row += 1

    A_dyn = problem.dynamics.A
    for k in range(K):
        dk = deltas[k]
        step = np.eye(n) + dk * A_dyn
        xo, xn = k * n, (k + 1) * n
        verts = hulls[k].vertices  # rows are -h(t_k, a_i)
        for j in range(n):
            add_entry(row + j, xn + j, 1.0)
            for jj in range(n):
                if step[j, jj] != 0.0:
                    add_entry(row + j, xo + jj, -step[j, jj])
            for i in range(gamma_sizes[k]):
                v = verts[i, j]
                if v != 0.0:
                    add_entry(row + j, gamma_offsets[k] + i, dk * v)
        l_list.extend([0.0] * n)
        u_list.extend([0.0] * n)
        row += n

    for k in range(K):
        for i in range(gamma_sizes[k]):
            add_entry(row, gamma_offsets[k] + i, 1.0)
        l_list.append(1.0)
        u_list.append(1.0)
        row += 1
        for i in range(gamma_sizes[k]):
            add_entry(row, gamma_offsets[k] + i, 1.0)
            l_list.append(0.0)
            u_list.append(np.inf)
            row += 1

    q = np.zeros(nvar)
    p_diag = np.zeros(nvar)
    constant = 0.0
    for k in range(K):
        dk = deltas[k]
        xo = k * n
        q[xo:xo + n] += dk * s_form.lin
        p_diag[xo:xo + n] += dk * s_form.quad
        constant += dk * s_form.const
        go = gamma_offsets[k]
        q[go:go + gamma_sizes[k]] += dk * hulls[k].vertex_costs
    xo = K * n
    q[xo:xo + n] += g_form.lin
    p_diag[xo:xo + n] += g_form.quad
    constant += g_form.const

    con = problem.constraint
    if mode == "hard" and con is not None:
        if isinstance(con, BoxConstraint):
            for k in range(K + 1):
                for j in range(n):
                    lo, hi = con.lo[j], con.hi[j]
                    if math.isinf(lo) and math.isinf(hi):
                        continue
                    add_entry(row, k * n + j, 1.0)
                    l_list.append(lo)
                    u_list.append(hi)
                    row += 1
        elif isinstance(con, HalfspaceConstraint):
            for k in range(K + 1):
                for r in range(con.C.shape[0]):
                    for j in range(n):
                        if con.C[r, j] != 0.0:
                            add_entry(row, k * n + j, con.C[r, j])
                    l_list.append(-np.inf)
                    u_list.append(con.d[r])
                    row += 1
        else:
            raise TypeError(f"unsupported constraint type {type(con)!r}")

    if mode == "penalty" and con is not None and np.isfinite(eps):
        # knot weights follow the stage quadrature; the terminal knot reuses
        # the last interval so the penalty vanishes exactly on the hard
        # feasible set
        weights = np.concatenate([deltas, [deltas[-1]]])
        extra_q: list = []
        if isinstance(con, BoxConstraint):
            for k in range(K + 1):
                for j in range(n):
                    lo, hi = con.lo[j], con.hi[j]
                    if not math.isinf(hi):
                        s_idx = nvar + len(extra_q)
                        extra_q.append(weights[k] / eps)
                        # x_j - s <= hi, s >= 0
                        add_entry(row, k * n + j, 1.0)
                        add_entry(row, s_idx, -1.0)
                        l_list.append(-np.inf)
                        u_list.append(hi)
                        row += 1
                        add_entry(row, s_idx, 1.0)
                        l_list.append(0.0)
                        u_list.append(np.inf)
                        row += 1
                    if not math.isinf(lo):
                        s_idx = nvar + len(extra_q)
                        extra_q.append(weights[k] / eps)
                        # x_j + s >= lo, s >= 0
                        add_entry(row, k * n + j, 1.0)
                        add_entry(row, s_idx, 1.0)
                        l_list.append(lo)
                        u_list.append(np.inf)
                        row += 1
                        add_entry(row, s_idx, 1.0)
                        l_list.append(0.0)
                        u_list.append(np.inf)
                        row += 1
        elif isinstance(con, HalfspaceConstraint):
            for k in range(K + 1):
                for r in range(con.C.shape[0]):
                    s_idx = nvar + len(extra_q)
                    extra_q.append(weights[k] / eps)
                    for j in range(n):
                        if con.C[r, j] != 0.0:
                            add_entry(row, k * n + j, con.C[r, j])
                    add_entry(row, s_idx, -1.0)
                    l_list.append(-np.inf)
                    u_list.append(con.d[r])
                    row += 1
                    add_entry(row, s_idx, 1.0)
                    l_list.append(0.0)
                    u_list.append(np.inf)
                    row += 1
        else:
            raise TypeError(f"unsupported constraint type {type(con)!r}")
        if extra_q:
            q = np.concatenate([q, np.asarray(extra_q)])
            p_diag = np.concatenate([p_diag, np.zeros(len(extra_q))])
            nvar += len(extra_q)

    A = sp.coo_matrix((vals, (rows_i, cols_i)), shape=(row, nvar)).tocsc()
    P = sp.diags(p_diag) if np.any(p_diag) else None
    program = cs.SparseConvexProgram(nvar=nvar, q=q, A=A,
                                     l=np.asarray(l_list), u=np.asarray(u_list), P=P)
    return AssembledLax(
        program=program, problem=problem, hulls=list(hulls), mode=mode, eps=eps,
        constant=constant, n=n, gamma_offsets=gamma_offsets, gamma_sizes=gamma_sizes,
    )


def solve_lax(problem: Problem, mode: str = "hard", eps: Optional[float] = None,
              per_interval: int = 65, opts: Optional[cs.SolverOptions] = None,
              assembled: Optional[AssembledLax] = None) -> LaxSolution:
    """Assemble (unless given) and solve; returns the relaxed trajectory.

    Raises InfeasibleProblem on a primal-infeasibility certificate; a MaxIters
    status is returned to the caller via the report for inspection.
    """
    asm = assembled if assembled is not None else assemble(
        problem, mode=mode, eps=eps, per_interval=per_interval)
    report = cs.solve(asm.program, opts)
    if report.status == cs.PRIMAL_INFEASIBLE:
        raise InfeasibleProblem(
            f"relaxed program infeasible in mode={asm.mode} "
            f"(certificate norm {np.max(np.abs(report.certificate)):.3e})"
        )
    K, n = asm.problem.grid.steps, asm.n
    z = report.x
    x_traj = z[: (K + 1) * n].reshape(K + 1, n)
    gamma_traj = [z[asm.gamma_offsets[k]: asm.gamma_offsets[k] + asm.gamma_sizes[k]].copy()
                  for k in range(K)]
    A_dyn = asm.problem.dynamics.A
    beta_traj = np.array([
        -(A_dyn @ x_traj[k]) + asm.hulls[k].vertices.T @ gamma_traj[k]
        for k in range(K)
    ]).reshape(K, n)
    return LaxSolution(
        grid=asm.problem.grid,
        x_traj=x_traj,
        beta_traj=beta_traj,
        gamma_traj=gamma_traj,
        objective=report.objective + asm.constant,
        report=report,
        hulls=asm.hulls,
    )


def relaxed_cost(problem: Problem, sol: LaxSolution,
                 hulls: Optional[Sequence[HullModel]] = None) -> float:
    """Mixture stage cost plus terminal cost of a relaxed trajectory.

    Evaluates the same quadrature as the assembled objective, so on a solver
    output it reproduces `sol.objective` up to solver accuracy.
    """
    grid = sol.grid
    K = grid.steps
    hulls = list(hulls) if hulls is not None else sol.hulls
    if hulls is None:
        hulls = [control_image_hull(problem, float(grid.knots[k])) for k in range(K)]
    total = 0.0
    for k in range(K):
        t = float(grid.knots[k])
        dk = grid.deltas[k]
        mix = float(hulls[k].vertex_costs @ sol.gamma_traj[k])
        total += dk * (problem.cost.stage_state(t, sol.x_traj[k]) + mix)
    return total + problem.cost.terminal(sol.x_traj[K])


@dataclass
class SweepEntry:
    eps: float
    objective: float
    status: str


def penalty_sweep(problem: Problem, eps_values: Sequence[float],
                  per_interval: int = 65,
                  opts: Optional[cs.SolverOptions] = None) -> List[SweepEntry]:
    """Solve the penalty relaxation for each eps (inf means penalty off)."""
    out = []
    hulls = None
    for eps in eps_values:
        if math.isinf(eps):
            sol = solve_lax(problem, mode="unconstrained", per_interval=per_interval,
                            opts=opts)
        else:
            sol = solve_lax(problem, mode="penalty", eps=float(eps),
                            per_interval=per_interval, opts=opts)
        if hulls is None:
            hulls = sol.hulls
        out.append(SweepEntry(eps=float(eps), objective=sol.objective,
                              status=sol.report.status))
    return out


def save_solution(sol: LaxSolution, path: str) -> None:
    """Write knot rows t, x1..xn, beta1..betan, gamma1..gammaN.

    The final knot has no step attached: its beta and gamma cells are empty.
    Ragged hull sizes are zero-padded to the widest step.
    """
    K = sol.grid.steps
    n = sol.x_traj.shape[1]
    width = max((len(g) for g in sol.gamma_traj), default=0)
    header = (["t"] + [f"x{i+1}" for i in range(n)]
              + [f"beta{i+1}" for i in range(n)]
              + [f"gamma{i+1}" for i in range(width)])
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(K + 1):
            cells = [repr(float(sol.grid.knots[k]))]
            cells += [repr(float(v)) for v in sol.x_traj[k]]
            if k < K:
                cells += [repr(float(v)) for v in sol.beta_traj[k]]
                g = sol.gamma_traj[k]
                cells += [repr(float(v)) for v in g]
                cells += ["0.0"] * (width - len(g))
            else:
                cells += [""] * (n + width)
            writer.writerow(cells)


def load_solution(path: str) -> LaxSolution:
    """Read a trajectory written by save_solution.

    The objective is recomputable via `relaxed_cost`; the report and hulls are
    not stored in the file.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n = sum(1 for h in header if h.startswith("x"))
    width = sum(1 for h in header if h.startswith("gamma"))
    knots, xs, betas, gammas = [], [], [], []
    for i, cells in enumerate(rows[1:]):
        knots.append(float(cells[0]))
        xs.append([float(v) for v in cells[1:1 + n]])
        beta_cells = cells[1 + n:1 + 2 * n]
        if any(c != "" for c in beta_cells):
            betas.append([float(v) for v in beta_cells])
            gammas.append(np.array([float(v) for v in cells[1 + 2 * n:1 + 2 * n + width]]))
    return LaxSolution(
        grid=TimeGrid(np.asarray(knots)),
        x_traj=np.asarray(xs),
        beta_traj=np.asarray(betas),
        gamma_traj=gammas,
        objective=math.nan,
        report=None,
        hulls=None,
    )
