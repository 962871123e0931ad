"""Convex conjugate machinery over sampled velocity hulls.

The reachable-velocity set of a structured problem at (t, x) is the image
{-f(t, x, a) : a in U}. Its convex hull, together with the reduced running
cost at each sampled image point, determines the Hamiltonian (a support
function) and its convex conjugate (a small linear program over hull
weights). The conjugate is finite exactly on the hull and +inf outside; the
infinite branch is carried as a tagged value, never as a float inside any
solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull, QhullError

from . import convexsolver as cs
from .model import Problem

__all__ = [
    "HullModel",
    "ConvexCombination",
    "ConjugateValue",
    "sample_hull",
    "control_image_hull",
    "reduced_lagrangian",
    "hamiltonian",
    "hstar",
    "hstar_structured",
    "hull_distance",
    "BiconjugateTable",
    "biconjugate",
]

# hull programs are small and well scaled already; Ruiz equilibration makes
# their simplex-degenerate geometry stall, so leave it off unless the caller
# passes options of their own
_HULL_OPTS = cs.SolverOptions(scaling_iters=0)


@dataclass(frozen=True)
class HullModel:
    """Pruned hull of reachable velocities with per-vertex reduced costs.

    Attributes
    ----------
    base : ndarray, shape (n,)
        The state-induced offset -A x common to every vertex.
    vertices : ndarray, shape (N, n)
        Extreme points b_i of the sampled hull (absolute, base included).
    vertex_costs : ndarray, shape (N,)
        Reduced running cost attained at each vertex.
    generator_controls : ndarray, shape (N, m)
        The control point whose image generated each vertex.
    """

    base: np.ndarray
    vertices: np.ndarray
    vertex_costs: np.ndarray
    generator_controls: np.ndarray

    def __post_init__(self):
        if self.vertices.ndim != 2 or self.vertices.shape[0] < 1:
            raise ValueError("a hull needs at least one vertex")
        if self.vertex_costs.shape != (self.vertices.shape[0],):
            raise ValueError("one cost per vertex")

    @property
    def size(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]


@dataclass(frozen=True)
class ConvexCombination:
    """Weights over hull vertices: nonnegative, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-9) or abs(float(np.sum(w)) - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to one")

    def combine(self, vertices: np.ndarray) -> np.ndarray:
        return self.weights @ vertices


class ConjugateValue:
    """Conjugate evaluation result; the infinite branch is a tagged sentinel."""

    __slots__ = ("finite", "value", "combination")

    def __init__(self, finite: bool, value: float,
                 combination: Optional[ConvexCombination] = None):
        self.finite = bool(finite)
        self.value = float(value)
        self.combination = combination

    @staticmethod
    def of(value: float, combination=None) -> "ConjugateValue":
        return ConjugateValue(True, value, combination)

    @staticmethod
    def infinite() -> "ConjugateValue":
        return ConjugateValue(False, math.inf)

    def __repr__(self):
        return f"ConjugateValue({'%g' % self.value if self.finite else 'inf'})"


def _affine_basis(points: np.ndarray, tol: float = 1e-9):
    center = points.mean(axis=0)
    shifted = points - center
    if points.shape[0] == 1:
        return center, np.zeros((0, points.shape[1]))
    _, s, vt = np.linalg.svd(shifted, full_matrices=False)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * max(top, 1.0)))
    return center, vt[:rank]


def _qhull_extreme(points: np.ndarray) -> np.ndarray:
    """Indices of extreme points of a full-rank point cloud."""
    if points.shape[1] == 1:
        flat = points[:, 0]
        return np.unique([int(np.argmin(flat)), int(np.argmax(flat))])
    return np.sort(np.unique(ConvexHull(points).vertices))


def _lower_facet_vertices(lifted: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Vertices supporting downward-facing facets of the lifted hull."""
    hull = ConvexHull(lifted)
    keep = set()
    for facet, eq in zip(hull.simplices, hull.equations):
        if eq[lifted.shape[1] - 1] < -tol:
            keep.update(int(i) for i in facet)
    return np.sort(np.fromiter(keep, dtype=int))


def _prune_lower_envelope(b_pts: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Indices of extreme points of the lower convex envelope of (b, cost).

    Duplicate b values keep the cheapest point, ties broken by first index.
    """
    count = b_pts.shape[0]
    scale = 1.0 + float(np.max(np.abs(b_pts), initial=0.0))
    tol = 1e-9 * scale

    used = np.zeros(count, dtype=bool)
    reps = []
    for i in range(count):
        if used[i]:
            continue
        dup = np.flatnonzero(np.linalg.norm(b_pts - b_pts[i], axis=1) <= tol)
        dup = dup[~used[dup]]
        used[dup] = True
        reps.append(int(dup[np.argmin(costs[dup])]))
    idx = np.asarray(reps, dtype=int)
    if idx.size <= 2:
        return idx

    B, C = b_pts[idx], costs[idx]
    center, basis = _affine_basis(B)
    if basis.shape[0] == 0:
        return idx[:1]
    proj = (B - center) @ basis.T

    cost_scale = 1.0 + float(np.max(np.abs(C)))
    lifted = np.column_stack([proj, C / cost_scale])
    _, lifted_basis = _affine_basis(lifted)
    try:
        if lifted_basis.shape[0] <= basis.shape[0]:
            # costs are affine in b across the cloud: the envelope is flat and
            # its extreme points are exactly the extreme points of conv(B)
            local = _qhull_extreme(proj)
        else:
            local = _lower_facet_vertices(lifted)
    except QhullError:
        local = _envelope_prune_by_lp(proj, C)
    return np.sort(idx[local])


def _envelope_prune_by_lp(proj: np.ndarray, costs: np.ndarray) -> np.ndarray:
    # fallback for degenerate clouds: point i survives unless the others can
    # reproduce its location at no higher cost
    count = proj.shape[0]
    keep = []
    for i in range(count):
        others = np.arange(count) != i
        val = _envelope_value(proj[others], costs[others], proj[i])
        if not val.finite or val.value > costs[i] + 1e-9 * (1 + abs(costs[i])):
            keep.append(i)
    return np.asarray(keep, dtype=int)


def _envelope_value(verts, costs, target, opts=None) -> ConjugateValue:
    """min sum(gamma*costs) s.t. gamma in simplex, sum(gamma*verts) == target."""
    nv, dim = verts.shape
    if nv == 0:
        return ConjugateValue.infinite()
    scale = 1.0 + float(np.max(np.abs(verts), initial=0.0))
    proj_gamma, dist = _project_onto_hull(verts, target, opts)
    if dist > 1e-7 * scale:
        return ConjugateValue.infinite()
    reached = proj_gamma @ verts

    A = np.vstack([
        verts.T,
        np.ones((1, nv)),
        np.eye(nv),
    ])
    l = np.concatenate([reached, [1.0], np.zeros(nv)])
    u = np.concatenate([reached, [1.0], np.full(nv, np.inf)])
    prog = cs.SparseConvexProgram(nvar=nv, q=costs, A=A, l=l, u=u)
    report = cs.solve(prog, opts if opts is not None else _HULL_OPTS)
    gamma = np.maximum(report.x, 0.0)
    gamma = gamma / np.sum(gamma)
    return ConjugateValue.of(float(costs @ gamma), ConvexCombination(gamma))


def _project_onto_hull(verts: np.ndarray, target: np.ndarray, opts=None):
    """Euclidean projection of target onto conv(verts): weights and distance.

    Always-feasible QP, so membership never rests on an infeasibility
    certificate.
    """
    nv, dim = verts.shape
    if nv == 1:
        return np.ones(1), float(np.linalg.norm(verts[0] - target))
    n_z = nv + dim  # gamma then residual s = sum(gamma*verts) - target
    P = np.zeros(n_z)
    P[nv:] = 2.0
    Pm = sp.diags(P)
    A = sp.bmat([
        [sp.csr_matrix(verts.T), -sp.eye(dim)],
        [sp.csr_matrix(np.ones((1, nv))), None],
        [sp.eye(nv), sp.csr_matrix((nv, dim))],
    ], format="csc")
    l = np.concatenate([target, [1.0], np.zeros(nv)])
    u = np.concatenate([target, [1.0], np.full(nv, np.inf)])
    prog = cs.SparseConvexProgram(nvar=n_z, q=np.zeros(n_z), A=A, l=l, u=u, P=Pm)
    report = cs.solve(prog, opts if opts is not None else _HULL_OPTS)
    gamma = np.maximum(report.x[:nv], 0.0)
    total = np.sum(gamma)
    gamma = gamma / total if total > 0 else np.full(nv, 1.0 / nv)
    dist = float(np.linalg.norm(gamma @ verts - target))
    return gamma, dist


def sample_hull(problem: Problem, t: float, x: np.ndarray,
                per_interval: int = 65) -> HullModel:
    """Sample the reachable-velocity image at (t, x) and prune it.

    Control points come from the problem's control set with `per_interval`
    samples per interval factor (endpoints always included); the point list is
    pruned to the extreme points of the lower convex envelope of
    (velocity, reduced cost) pairs.
    """
    x = np.asarray(x, dtype=float)
    controls = problem.controls.hull_sample_points(per_interval)
    base = -(problem.dynamics.A @ x)
    h_vals = np.array([problem.dynamics.h(t, a) for a in controls])
    b_pts = base - h_vals
    state_cost = problem.cost.stage_state(t, x)
    costs = np.array([state_cost + problem.cost.stage_control(t, a) for a in controls])
    keep = _prune_lower_envelope(b_pts, costs)
    return HullModel(
        base=base,
        vertices=b_pts[keep],
        vertex_costs=costs[keep],
        generator_controls=controls[keep],
    )


def control_image_hull(problem: Problem, t: float, per_interval: int = 65) -> HullModel:
    """State-independent hull of {-h(t, a)} with control-cost vertices.

    This is the hull the structured decomposition shifts by A x; the state
    cost is excluded from the vertex costs.
    """
    controls = problem.controls.hull_sample_points(per_interval)
    h_vals = np.array([problem.dynamics.h(t, a) for a in controls])
    b_pts = -h_vals
    costs = np.array([problem.cost.stage_control(t, a) for a in controls])
    keep = _prune_lower_envelope(b_pts, costs)
    return HullModel(
        base=np.zeros(problem.n),
        vertices=b_pts[keep],
        vertex_costs=costs[keep],
        generator_controls=controls[keep],
    )


def reduced_lagrangian(problem: Problem, t: float, x: np.ndarray, b: np.ndarray,
                       candidates: np.ndarray, tol_match: float = 1e-8) -> ConjugateValue:
    """Cheapest running cost among candidate controls whose velocity matches -b.

    Scans the finite candidate list for controls with |f(t,x,a) + b| <= tol_match
    and returns the infinite sentinel when none matches.
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    best = None
    for a in np.atleast_2d(candidates):
        if np.linalg.norm(problem.dynamics.f(t, x, a) + b) <= tol_match:
            val = problem.cost.stage_state(t, x) + problem.cost.stage_control(t, a)
            if best is None or val < best:
                best = val
    return ConjugateValue.of(best) if best is not None else ConjugateValue.infinite()


def hamiltonian(hull: HullModel, p: np.ndarray) -> float:
    """Support-function form: max over vertices of p.b - cost."""
    p = np.asarray(p, dtype=float)
    return float(np.max(hull.vertices @ p - hull.vertex_costs))


def hull_distance(hull: HullModel, b: np.ndarray, solver_opts=None) -> float:
    """Euclidean distance from b to the hull (0 inside)."""
    _, dist = _project_onto_hull(hull.vertices, np.asarray(b, dtype=float), solver_opts)
    return dist


def hstar(hull: HullModel, b: np.ndarray, solver_opts=None,
          membership_tol: float = 1e-7) -> ConjugateValue:
    """Convex conjugate of the Hamiltonian at velocity b.

    Finite exactly when b lies in the hull, in which case the value is the
    cheapest convex combination of vertex costs realizing b, solved as a
    linear program with the in-package solver. Membership is decided by an
    always-feasible projection first, so the cost program is never posed
    against an unreachable b.
    """
    b = np.asarray(b, dtype=float)
    verts = hull.vertices
    scale = 1.0 + float(np.max(np.abs(verts), initial=0.0))
    gamma0, dist = _project_onto_hull(verts, b, solver_opts)
    if dist > membership_tol * scale:
        return ConjugateValue.infinite()
    if verts.shape[0] == 1:
        return ConjugateValue.of(float(hull.vertex_costs[0]),
                                 ConvexCombination(np.ones(1)))
    reached = gamma0 @ verts
    nv = verts.shape[0]
    A = sp.vstack([
        sp.csr_matrix(verts.T),
        sp.csr_matrix(np.ones((1, nv))),
        sp.eye(nv),
    ], format="csc")
    l = np.concatenate([reached, [1.0], np.zeros(nv)])
    u = np.concatenate([reached, [1.0], np.full(nv, np.inf)])
    prog = cs.SparseConvexProgram(nvar=nv, q=hull.vertex_costs, A=A, l=l, u=u)
    report = cs.solve(prog,
                      solver_opts if solver_opts is not None else _HULL_OPTS)
    gamma = np.maximum(report.x, 0.0)
    total = np.sum(gamma)
    if total <= 0:
        gamma = gamma0
    else:
        gamma = gamma / total
    return ConjugateValue.of(float(hull.vertex_costs @ gamma), ConvexCombination(gamma))


def hstar_structured(problem: Problem, t: float, x: np.ndarray, b: np.ndarray,
                     per_interval: int = 65, solver_opts=None) -> ConjugateValue:
    """Structured evaluation: state cost plus the shifted control-image conjugate.

    Exploits f = A x + h(t, a): the conjugate at (t, x, b) equals
    stage_state(t, x) + conjugate of the control image at b + A x.
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    hull0 = control_image_hull(problem, t, per_interval)
    inner = hstar(hull0, b + problem.dynamics.A @ x, solver_opts)
    if not inner.finite:
        return ConjugateValue.infinite()
    return ConjugateValue.of(problem.cost.stage_state(t, x) + inner.value,
                             inner.combination)


class BiconjugateTable:
    """Precomputed conjugate values on a velocity grid, for sup-form queries.

    The grid is the hull bounding box (collapsed along zero-extent axes)
    augmented with the hull vertices themselves; points where the conjugate is
    infinite cannot attain the sup and are dropped.
    """

    def __init__(self, hull: HullModel, density: int = 33, solver_opts=None):
        verts = hull.vertices
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        axes = []
        spacing = 0.0
        for a, b_ in zip(lo, hi):
            if b_ > a:
                axes.append(np.linspace(a, b_, density))
                spacing = max(spacing, (b_ - a) / (density - 1))
            else:
                axes.append(np.array([a]))
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([m.ravel() for m in mesh])
        grid = np.vstack([grid, verts])
        pts, vals = [], []
        for b_pt in grid:
            cv = hstar(hull, b_pt, solver_opts)
            if cv.finite:
                pts.append(b_pt)
                vals.append(cv.value)
        self.points = np.asarray(pts)
        self.values = np.asarray(vals)
        self.resolution = spacing

    def evaluate(self, p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float)
        return float(np.max(self.points @ p - self.values))


def biconjugate(hull: HullModel, p: np.ndarray, density: int = 33,
                solver_opts=None) -> float:
    """Grid-sup estimate of the double conjugate at p.

    Intended for property checks against `hamiltonian`; builds a fresh table
    per call, so batch users should hold a BiconjugateTable instead.
    """
    return BiconjugateTable(hull, density, solver_opts).evaluate(p)
