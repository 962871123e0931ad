"""Problem containers for finite-horizon optimal control with structured dynamics.

A problem couples a time grid, a control set, dynamics of the form
``f(t, x, a) = A x + h(t, a)``, running costs split into a state part and a
control part, a terminal cost, and an optional convex state constraint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "TimeGrid",
    "QuadraticCost",
    "FiniteSet",
    "Box",
    "ProductSet",
    "StructuredDynamics",
    "CostSpec",
    "BoxConstraint",
    "HalfspaceConstraint",
    "Problem",
    "ValidationReport",
    "validate",
    "gear_preset",
]


@dataclass(frozen=True)
class TimeGrid:
    """Knot sequence t0 = t_0 < t_1 < ... < t_K = horizon end.

    A single knot encodes a zero-length horizon (no steps).

    Attributes
    ----------
    knots : ndarray, shape (K+1,)
        Strictly increasing knot times.
    """

    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 1:
            raise ValueError("time grid needs at least one knot")
        if not np.all(np.diff(k) > 0):
            raise ValueError("time grid knots must be strictly increasing")
        object.__setattr__(self, "knots", k)

    @staticmethod
    def uniform(t0: float, t_end: float, steps: int) -> "TimeGrid":
        """Uniform grid with `steps` intervals on [t0, t_end]."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        return TimeGrid(np.linspace(float(t0), float(t_end), steps + 1))

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def t_end(self) -> float:
        return float(self.knots[-1])

    @property
    def steps(self) -> int:
        return self.knots.size - 1

    @property
    def deltas(self) -> np.ndarray:
        """Interval lengths, shape (K,)."""
        return np.diff(self.knots)


class QuadraticCost:
    """Convex cost of the form const + lin.z + 0.5 * sum(quad * z**2).

    `quad` entries must be nonnegative (diagonal quadratic, convex). Instances
    are callable on a vector and expose their coefficients so programs can be
    assembled from them.
    """

    def __init__(self, dim: int, const: float = 0.0,
                 lin: Optional[Sequence[float]] = None,
                 quad: Optional[Sequence[float]] = None):
        self.dim = int(dim)
        self.const = float(const)
        self.lin = np.zeros(self.dim) if lin is None else np.asarray(lin, dtype=float)
        self.quad = np.zeros(self.dim) if quad is None else np.asarray(quad, dtype=float)
        if self.lin.shape != (self.dim,) or self.quad.shape != (self.dim,):
            raise ValueError("coefficient shapes must match dim")
        if np.any(self.quad < 0):
            raise ValueError("quadratic coefficients must be nonnegative")

    def __call__(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(self.const + self.lin @ z + 0.5 * np.sum(self.quad * z * z))

    def __repr__(self):
        return f"QuadraticCost(dim={self.dim}, const={self.const})"


class FiniteSet:
    """Finite control set given by an explicit point list, shape (P, m)."""

    def __init__(self, points: Sequence[Sequence[float]]):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise ValueError("finite control set needs at least one point")
        self.points = pts

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def contains(self, a: np.ndarray, tol: float = 1e-9) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.min(np.linalg.norm(self.points - a, axis=1)) <= tol)

    def hull_sample_points(self, per_interval: int) -> np.ndarray:
        return self.points.copy()

    def net_candidates(self, spacing: float) -> np.ndarray:
        return self.points.copy()


class Box:
    """Axis-aligned box control set lo <= a <= hi (componentwise)."""

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise ValueError("box bounds must have equal shape")
        if np.any(self.hi < self.lo):
            raise ValueError("box upper bounds must dominate lower bounds")

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, a: np.ndarray, tol: float = 1e-9) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.all(a >= self.lo - tol) and np.all(a <= self.hi + tol))

    def hull_sample_points(self, per_interval: int) -> np.ndarray:
        # linspace keeps both endpoints, which hull pruning relies on
        axes = [np.linspace(l, h, max(2, per_interval)) if h > l else np.array([l])
                for l, h in zip(self.lo, self.hi)]
        return _cartesian(axes)

    def net_candidates(self, spacing: float) -> np.ndarray:
        axes = []
        for l, h in zip(self.lo, self.hi):
            if h > l:
                cells = int(np.ceil((h - l) / spacing))
                axes.append(np.linspace(l, h, cells + 1))
            else:
                axes.append(np.array([l]))
        return _cartesian(axes)


class ProductSet:
    """Cartesian product of control-set factors (finite and/or box)."""

    def __init__(self, factors: Sequence["FiniteSet | Box"]):
        if not factors:
            raise ValueError("product control set needs at least one factor")
        self.factors = tuple(factors)

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    def _split(self, a: np.ndarray):
        a = np.asarray(a, dtype=float)
        out, at = [], 0
        for f in self.factors:
            out.append(a[at:at + f.dim])
            at += f.dim
        return out

    def contains(self, a: np.ndarray, tol: float = 1e-9) -> bool:
        parts = self._split(a)
        return all(f.contains(part, tol) for f, part in zip(self.factors, parts))

    def hull_sample_points(self, per_interval: int) -> np.ndarray:
        blocks = [f.hull_sample_points(per_interval) for f in self.factors]
        return _block_product(blocks)

    def net_candidates(self, spacing: float) -> np.ndarray:
        blocks = [f.net_candidates(spacing) for f in self.factors]
        return _block_product(blocks)


def _cartesian(axes: Sequence[np.ndarray]) -> np.ndarray:
    grids = list(itertools.product(*axes))
    return np.asarray(grids, dtype=float)


def _block_product(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = [np.concatenate(combo) for combo in itertools.product(*blocks)]
    return np.asarray(rows, dtype=float)


@dataclass(frozen=True)
class StructuredDynamics:
    """Dynamics f(t, x, a) = A x + h(t, a) with A constant in time.

    Parameters
    ----------
    A : ndarray, shape (n, n)
        Linear state coupling.
    control_term : callable
        h(t, a) -> ndarray of shape (n,), jointly continuous.
    """

    A: np.ndarray
    control_term: Callable[[float, np.ndarray], np.ndarray]

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def f(self, t: float, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.h(t, a)

    def h(self, t: float, a: np.ndarray) -> np.ndarray:
        out = np.asarray(self.control_term(float(t), np.asarray(a, dtype=float)),
                         dtype=float)
        if out.shape != (self.n,):
            raise ValueError(f"control term returned shape {out.shape}, "
                             f"expected ({self.n},)")
        return out


@dataclass(frozen=True)
class CostSpec:
    """Running cost split as stage_state(t,x) + stage_control(t,a), plus terminal(x).

    `stage_state_form` / `terminal_form` carry the quadratic encodings needed to
    assemble convex programs; when absent those costs are usable only for
    pointwise evaluation.
    """

    stage_state: Callable[[float, np.ndarray], float]
    stage_control: Callable[[float, np.ndarray], float]
    terminal: Callable[[np.ndarray], float]
    stage_state_form: Optional[QuadraticCost] = None
    terminal_form: Optional[QuadraticCost] = None

    @staticmethod
    def from_forms(n: int, m: int,
                   stage_state: Optional[QuadraticCost] = None,
                   stage_control: Optional[QuadraticCost] = None,
                   terminal: Optional[QuadraticCost] = None) -> "CostSpec":
        """Build a spec where every supplied cost is a quadratic form.

        Omitted costs default to zero. The state and terminal forms stay
        attached so programs can be assembled from them.
        """
        s_form = stage_state if stage_state is not None else QuadraticCost(n)
        r_form = stage_control if stage_control is not None else QuadraticCost(m)
        g_form = terminal if terminal is not None else QuadraticCost(n)
        return CostSpec(
            stage_state=lambda t, x: s_form(x),
            stage_control=lambda t, a: r_form(a),
            terminal=lambda x: g_form(x),
            stage_state_form=s_form,
            terminal_form=g_form,
        )


class BoxConstraint:
    """State constraint lo <= x <= hi; +-inf entries leave a side unbounded."""

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise ValueError("constraint bounds must have equal shape")
        if np.any(self.hi < self.lo):
            raise ValueError("constraint upper bounds must dominate lower bounds")

    @property
    def n(self) -> int:
        return self.lo.size

    def violation(self, x: np.ndarray) -> float:
        """Largest componentwise overshoot outside the box (0 inside)."""
        x = np.asarray(x, dtype=float)
        over = np.maximum(x - self.hi, 0.0)
        under = np.maximum(self.lo - x, 0.0)
        return float(np.max(np.maximum(over, under), initial=0.0))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return self.violation(x) <= tol


class HalfspaceConstraint:
    """State constraint C x <= d (intersection of halfspaces).

    Row scaling weights both feasibility margins and penalty terms; rows are
    used as given.
    """

    def __init__(self, C: Sequence[Sequence[float]], d: Sequence[float]):
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.d = np.atleast_1d(np.asarray(d, dtype=float))
        if self.C.shape[0] != self.d.size:
            raise ValueError("C and d row counts differ")

    @property
    def n(self) -> int:
        return self.C.shape[1]

    def violation(self, x: np.ndarray) -> float:
        slack = self.C @ np.asarray(x, dtype=float) - self.d
        return float(np.max(np.maximum(slack, 0.0), initial=0.0))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return self.violation(x) <= tol


StateConstraint = Optional["BoxConstraint | HalfspaceConstraint"]


@dataclass(frozen=True)
class Problem:
    """A complete finite-horizon problem instance.

    Minimize the running cost plus terminal cost over admissible controls,
    subject to the structured dynamics, the state constraint (when present),
    and x(t0) = x0.
    """

    dynamics: StructuredDynamics
    cost: CostSpec
    controls: "FiniteSet | Box | ProductSet"
    grid: TimeGrid
    x0: np.ndarray
    constraint: StateConstraint = None
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))

    @property
    def n(self) -> int:
        return self.dynamics.n

    @property
    def m(self) -> int:
        return self.controls.dim


@dataclass
class ValidationReport:
    ok: bool
    messages: list = field(default_factory=list)


def validate(problem: Problem, samples: int = 100, seed: int = 0) -> ValidationReport:
    """Check dimensions, initial feasibility, and convexity by sampling.

    Convexity of the cost pieces is spot-checked at `samples` random midpoints;
    this can only ever refute convexity, never certify it.
    """
    msgs = []
    n, m = problem.n, problem.m
    if problem.x0.shape != (n,):
        msgs.append(f"x0 has shape {problem.x0.shape}, expected ({n},)")
    try:
        h0 = problem.dynamics.h(problem.grid.t0, _some_control(problem.controls))
        if h0.shape != (n,):
            msgs.append("control term output dimension mismatch")
    except Exception as exc:  # noqa: BLE001 - report, do not crash validation
        msgs.append(f"control term not evaluable: {exc}")
    if problem.constraint is not None:
        if problem.constraint.n != n:
            msgs.append("state constraint dimension mismatch")
        elif problem.x0.shape == (n,) and not problem.constraint.contains(problem.x0, tol=1e-9):
            msgs.append("x0 violates the state constraint")

    rng = np.random.default_rng(seed)
    u_pts = problem.controls.hull_sample_points(9)
    t_lo, t_hi = problem.grid.t0, problem.grid.t_end
    scale = 1.0 + float(np.max(np.abs(problem.x0), initial=0.0))
    tol = 1e-8 * scale

    def midpoint_gap(fun, za, zb):
        mid = 0.5 * (za + zb)
        return fun(mid) - 0.5 * (fun(za) + fun(zb))

    for check, draw in (
        ("stage_state", "x"),
        ("terminal", "x"),
        ("stage_control", "u"),
    ):
        bad = 0
        for _ in range(samples):
            t = rng.uniform(t_lo, t_hi)
            if draw == "x":
                za = problem.x0 + scale * rng.uniform(-1, 1, size=n)
                zb = problem.x0 + scale * rng.uniform(-1, 1, size=n)
                fn = (lambda z: problem.cost.stage_state(t, z)) if check == "stage_state" \
                    else (lambda z: problem.cost.terminal(z))
            else:
                # convex combinations of admissible points stay in conv(U),
                # where the control cost must be evaluable
                w = rng.dirichlet(np.ones(len(u_pts)))
                za = w @ u_pts
                w = rng.dirichlet(np.ones(len(u_pts)))
                zb = w @ u_pts
                fn = lambda z: problem.cost.stage_control(t, z)
            try:
                if midpoint_gap(fn, za, zb) > tol:
                    bad += 1
            except Exception as exc:  # noqa: BLE001
                msgs.append(f"{check} not evaluable on conv(U) samples: {exc}")
                break
        if bad:
            msgs.append(f"{check} failed midpoint convexity at {bad}/{samples} samples")

    return ValidationReport(ok=not msgs, messages=msgs)


def _some_control(cs) -> np.ndarray:
    if isinstance(cs, FiniteSet):
        return cs.points[0]
    if isinstance(cs, Box):
        return cs.lo
    return np.concatenate([_some_control(f) for f in cs.factors])


def _gear_control_term(t: float, a: np.ndarray) -> np.ndarray:
    gear, throttle = a[0], a[1]
    gain = throttle / (1.0 + 3.0 * gear * gear)
    return np.array([0.0, gain, 0.0, -gear * gain])


def gear_preset(steps: int = 100) -> Problem:
    """Two-gear vehicle benchmark on [0, 1] from the origin.

    Four states (position, velocity-like pair, and an accumulated pair), a
    discrete gear choice in {1, 2} crossed with a throttle in [0, 1], linear
    running cost on the throttle, terminal cost 1000 * x3, and the path
    constraint |x2| <= 0.1.
    """
    A = np.zeros((4, 4))
    A[0, 1] = 1.0
    A[2, 3] = 1.0
    dyn = StructuredDynamics(A=A, control_term=_gear_control_term)
    cost = CostSpec.from_forms(
        n=4, m=2,
        stage_control=QuadraticCost(2, lin=[0.0, 1.0]),
        terminal=QuadraticCost(4, lin=[0.0, 0.0, 1000.0, 0.0]),
    )
    controls = ProductSet([FiniteSet([[1.0], [2.0]]), Box([0.0], [1.0])])
    inf = np.inf
    constraint = BoxConstraint(lo=[-inf, -0.1, -inf, -inf], hi=[inf, 0.1, inf, inf])
    return Problem(
        dynamics=dyn,
        cost=cost,
        controls=controls,
        grid=TimeGrid.uniform(0.0, 1.0, steps),
        x0=np.zeros(4),
        constraint=constraint,
        name="gear",
    )
