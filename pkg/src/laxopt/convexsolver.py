"""Sparse first-order convex solver (ADMM operator splitting).

Solves programs of the form

    minimize   0.5 x' P x + q' x
    subject to l <= A x <= u

with P positive semidefinite and rows with l == u acting as equalities.
The implementation follows the standard operator-splitting scheme: Ruiz
equilibration, a quasi-definite KKT factorization reused across iterations,
residual-balancing step-size adaptation, a primal-infeasibility certificate
test, and an active-set polish pass for high-accuracy solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SparseConvexProgram",
    "SolverOptions",
    "SolveReport",
    "FeasibilityResult",
    "solve",
    "feasibility",
]

OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
MAX_ITERS = "MaxIters"

_RHO_EQ_BOOST = 1e3  # stiffer step on equality rows speeds up equality-heavy programs


class SparseConvexProgram:
    """Problem data (P, q, A, l, u); P may be None for linear objectives."""

    def __init__(self, nvar: int, q, A, l, u, P=None):
        self.nvar = int(nvar)
        self.q = np.asarray(q, dtype=float).ravel()
        self.A = sp.csc_matrix(A)
        self.l = np.asarray(l, dtype=float).ravel()
        self.u = np.asarray(u, dtype=float).ravel()
        if P is None:
            self.P = sp.csc_matrix((self.nvar, self.nvar))
        else:
            self.P = sp.csc_matrix(P)
        m = self.A.shape[0]
        if self.q.size != self.nvar or self.A.shape[1] != self.nvar:
            raise ValueError("objective/constraint dimensions disagree with nvar")
        if self.P.shape != (self.nvar, self.nvar):
            raise ValueError("P must be nvar x nvar")
        if self.l.size != m or self.u.size != m:
            raise ValueError("bound vectors must match constraint row count")
        if np.any(self.l > self.u):
            raise ValueError("every row needs l <= u")
        if np.any(np.isnan(self.l)) or np.any(np.isnan(self.u)) or np.any(np.isnan(self.q)):
            raise ValueError("nan in problem data")

    @property
    def nrows(self) -> int:
        return self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.P @ x) + self.q @ x)


@dataclass
class SolverOptions:
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iters: int = 200000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    scaling_iters: int = 10
    check_every: int = 25
    adapt_every: int = 50
    rho_min: float = 1e-6
    rho_max: float = 1e6
    eps_infeas: float = 1e-7
    polish: bool = True
    polish_reg: float = 1e-9
    polish_refine: int = 3
    # once residuals drop below this, polish is attempted periodically instead
    # of waiting for full first-order convergence
    early_polish_tol: float = 1e-5
    early_polish_every: int = 500


@dataclass
class SolveReport:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    polished: bool = False
    certificate: Optional[np.ndarray] = None

    @property
    def z(self) -> np.ndarray:
        """Decision-vector alias; some callers name the primal point z."""
        return self.x


@dataclass
class FeasibilityResult:
    feasible: bool
    point: Optional[np.ndarray]
    status: str
    residual: float = np.nan


def _norm_inf(v) -> float:
    return float(np.max(np.abs(v), initial=0.0))


class _Scaling:
    """Ruiz equilibration of the stacked [P A'; A 0] matrix plus cost scaling."""

    def __init__(self, prog: SparseConvexProgram, iters: int):
        n, m = prog.nvar, prog.nrows
        d = np.ones(n)
        e = np.ones(m)
        c = 1.0
        P = prog.P.copy()
        A = prog.A.copy()
        q = prog.q.copy()
        for _ in range(iters):
            # inf-norms of the scaled KKT columns
            col_norm = np.maximum(
                _col_inf_norms(P), _col_inf_norms(A)
            )
            row_norm = _row_inf_norms(A)
            dd = 1.0 / np.sqrt(np.maximum(col_norm, 1e-10))
            ee = 1.0 / np.sqrt(np.maximum(row_norm, 1e-10))
            dd = np.clip(dd, 1e-5, 1e5)
            ee = np.clip(ee, 1e-5, 1e5)
            Dd = sp.diags(dd)
            Ee = sp.diags(ee)
            P = (Dd @ P @ Dd).tocsc()
            A = (Ee @ A @ Dd).tocsc()
            q = dd * q
            d *= dd
            e *= ee
            # normalize the cost so its gradient has about unit magnitude; a
            # zero objective (feasibility phase) must not be scaled at all
            p_cols = _col_inf_norms(P)
            gain = max(np.mean(p_cols) if p_cols.size else 0.0, _norm_inf(q))
            if gain <= 1e-12:
                cc = 1.0
            else:
                cc = min(max(1.0 / gain, 1e-6), 1e6)
            P = P * cc
            q = q * cc
            c *= cc
        self.d, self.e, self.c = d, e, c
        self.P, self.A, self.q = P, A, q
        self.l = e * prog.l
        self.u = e * prog.u

    def unscale_x(self, x):
        return self.d * x

    def unscale_y(self, y):
        return self.e * y / self.c


def _col_inf_norms(M: sp.csc_matrix) -> np.ndarray:
    M = sp.csc_matrix(abs(M))
    out = np.zeros(M.shape[1])
    if M.nnz:
        out = np.asarray(M.max(axis=0).todense()).ravel()
    return out


def _row_inf_norms(M: sp.csc_matrix) -> np.ndarray:
    M = sp.csr_matrix(abs(M))
    out = np.zeros(M.shape[0])
    if M.nnz:
        out = np.asarray(M.max(axis=1).todense()).ravel()
    return out


def _factor_kkt(P, A, sigma, rho_vec):
    n, m = P.shape[0], A.shape[0]
    kkt = sp.bmat(
        [
            [P + sigma * sp.eye(n), A.T],
            [A, -sp.diags(1.0 / rho_vec)],
        ],
        format="csc",
    )
    return spla.splu(kkt)


def _infeasibility_certificate(prog, scaling, dy, opts) -> bool:
    """Test whether dy (scaled dual step) certifies primal infeasibility."""
    dy_un = scaling.e * dy / scaling.c if scaling else dy
    norm_dy = _norm_inf(dy_un)
    if norm_dy <= opts.eps_infeas:
        return False
    At_dy = prog.A.T @ dy_un
    if _norm_inf(At_dy) > opts.eps_infeas * norm_dy:
        return False
    pos = dy_un > 0
    neg = dy_un < 0
    support = 0.0
    if np.any(pos):
        vals = prog.u[pos] * dy_un[pos]
        if np.any(np.isinf(vals)):
            return False
        support += float(np.sum(vals))
    if np.any(neg):
        vals = prog.l[neg] * dy_un[neg]
        if np.any(np.isinf(vals)):
            return False
        support += float(np.sum(vals))
    return support < -opts.eps_infeas * norm_dy


def _solve_active_set(prog: SparseConvexProgram, low, upp, opts: SolverOptions):
    """KKT solve with the given active rows; None on factorization failure."""
    m = prog.nrows
    eq = prog.l == prog.u
    active = eq | low | upp
    if not np.any(active):
        if prog.P.nnz == 0:
            return None
        try:
            x_new = spla.spsolve(sp.csc_matrix(prog.P + opts.polish_reg * sp.eye(prog.nvar)),
                                 -prog.q)
        except Exception:  # noqa: BLE001
            return None
        return x_new, np.zeros(m)
    rows = np.flatnonzero(active)
    Ared = prog.A[rows]
    bred = np.where(upp, prog.u, prog.l)[rows]
    n, k = prog.nvar, rows.size
    reg = opts.polish_reg
    kkt = sp.bmat(
        [[prog.P + reg * sp.eye(n), Ared.T], [Ared, -reg * sp.eye(k)]],
        format="csc",
    )
    rhs = np.concatenate([-prog.q, bred])
    try:
        lu = spla.splu(kkt)
    except RuntimeError:
        return None
    sol = lu.solve(rhs)
    # iterative refinement against the unregularized system
    kkt_true = sp.bmat([[prog.P, Ared.T], [Ared, None]], format="csc")
    for _ in range(opts.polish_refine):
        resid = rhs - kkt_true @ sol
        sol = sol + lu.solve(resid)
    x_new = sol[:n]
    y_new = np.zeros(m)
    y_new[rows] = sol[n:]
    return x_new, y_new


def _recover_dual(prog: SparseConvexProgram, x_new):
    """Sign-correct multipliers for a fixed primal point; None when none exist.

    An active set read off a degenerate vertex is usually rank deficient, so
    the multipliers that fall out of the KKT solve can carry arbitrary signs
    even when the primal is exactly optimal. Instead, look for any solution of
    the stationarity system supported on the at-bound rows that also carries
    the signs the bounds demand: project back and forth between that affine
    set and the sign orthant. A suboptimal primal admits no such multiplier,
    so the projections fail to meet and the candidate dies here.
    """
    z = prog.A @ x_new
    eq = prog.l == prog.u
    lb = np.where(np.isfinite(prog.l), prog.l, 0.0)
    ub = np.where(np.isfinite(prog.u), prog.u, 0.0)
    atol = 1e-8
    on_low = ~eq & np.isfinite(prog.l) & (z - prog.l <= atol * _scale1(lb))
    on_upp = ~eq & np.isfinite(prog.u) & (prog.u - z <= atol * _scale1(ub))
    rows = np.flatnonzero(eq | on_low | on_upp)
    c = -(prog.P @ x_new + prog.q)
    cnorm = max(_norm_inf(c), 1.0)
    y_new = np.zeros(prog.nrows)
    if rows.size == 0:
        return y_new if _norm_inf(c) <= 1e-10 * cnorm else None
    if rows.size > 4000:
        return None
    M = np.asarray(prog.A[rows].todense()).T  # stationarity columns, n x k
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > 1e-11 * max(s[0], 1.0))) if s.size else 0
    y0 = Vt[:rank].T @ ((U[:, :rank].T @ c) / s[:rank])
    if _norm_inf(M @ y0 - c) > 1e-8 * cnorm:
        return None
    null = Vt[rank:].T  # k x (k - rank)
    l_in = np.where(eq[rows] | on_low[rows], -np.inf, 0.0)
    u_in = np.where(eq[rows] | on_upp[rows], np.inf, 0.0)
    # sign s: +1 rows need y >= 0, -1 rows y <= 0, 0 rows free
    sgn = np.zeros(rows.size)
    sgn[np.isfinite(u_in) & (u_in == 0.0)] = -1.0
    sgn[np.isfinite(l_in) & (l_in == 0.0)] = 1.0
    v = _fit_signs(y0, null, sgn)
    if v is None:
        return None
    y_new[rows] = np.clip(v, l_in, u_in)
    return y_new


def _fit_signs(y0, null, sgn):
    """Damped Newton over null-space coefficients to kill sign violations.

    Minimizes the squared hinge of the sign constraints; the minimum is zero
    exactly when a sign-correct multiplier exists on this affine slice.
    """
    def violations(y):
        return np.maximum(0.0, -sgn * y) * np.abs(sgn)

    v = y0
    if null.size == 0:
        return v if _norm_inf(violations(v)) <= 1e-9 * (1.0 + _norm_inf(v)) else None
    dim = null.shape[1]
    delta = np.zeros(dim)
    for _ in range(200):
        y = y0 + null @ delta
        r = violations(y)
        tol = 1e-9 * (1.0 + _norm_inf(y))
        if _norm_inf(r) <= tol:
            return y
        act = r > 0
        grad = -null[act].T @ (sgn[act] * r[act])
        Na = sgn[act, None] * null[act]
        hess = Na.T @ Na + 1e-12 * (1.0 + np.trace(Na.T @ Na)) * np.eye(dim)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            return None
        f0 = 0.5 * float(r @ r)
        t = 1.0
        for _ in range(30):
            r_t = violations(y0 + null @ (delta + t * step))
            if 0.5 * float(r_t @ r_t) <= f0 + 1e-4 * t * float(grad @ step):
                break
            t *= 0.5
        else:
            return None
        delta = delta + t * step
    return None


def _polish(prog: SparseConvexProgram, low0, upp0, opts: SolverOptions):
    """Refine the iterate by solving on a working set of active rows.

    The initial set comes from the rows the ADMM projection actually pinned, so
    it is consistent with the current primal by construction. Constraint rows
    the candidate violates are added and the solve repeated a few times; the
    multipliers are then rebuilt around the final primal with correct signs.
    The caller accepts the pair only when the full KKT residuals check out.
    """
    eq = prog.l == prog.u
    low = low0 & ~eq
    upp = upp0 & ~eq & ~low
    x_new = None
    for _ in range(6):
        out = _solve_active_set(prog, low, upp, opts)
        if out is None:
            return None
        x_new = out[0]
        if not np.all(np.isfinite(x_new)) or _norm_inf(x_new) > 1e12:
            return None
        z = prog.A @ x_new
        ftol = 1e-9
        viol_upp = ~upp & ~eq & np.isfinite(prog.u) & (
            z > prog.u + ftol * _scale1(np.where(np.isfinite(prog.u), prog.u, 0.0)))
        viol_low = ~low & ~eq & np.isfinite(prog.l) & (
            z < prog.l - ftol * _scale1(np.where(np.isfinite(prog.l), prog.l, 0.0)))
        if not (np.any(viol_upp) or np.any(viol_low)):
            break
        low = low | viol_low
        upp = upp | viol_upp
    else:
        return None
    y_new = _recover_dual(prog, x_new)
    if y_new is None:
        return None
    return x_new, y_new


def _scale1(v):
    return np.maximum(1.0, np.abs(v))


def _residuals(prog, x, y):
    z = prog.A @ x
    prim_viol = np.maximum(z - prog.u, 0.0) + np.maximum(prog.l - z, 0.0)
    r_prim = _norm_inf(prim_viol)
    r_dual = _norm_inf(prog.P @ x + prog.q + prog.A.T @ y)
    return r_prim, r_dual


def solve(prog: SparseConvexProgram, opts: Optional[SolverOptions] = None) -> SolveReport:
    """Run ADMM on the program and return the best iterate found."""
    opts = opts or SolverOptions()
    n, m = prog.nvar, prog.nrows
    if m == 0:
        raise ValueError("programs must have at least one constraint row")

    scaling = _Scaling(prog, opts.scaling_iters) if opts.scaling_iters > 0 else None
    if scaling is not None:
        P, A, q, l, u = scaling.P, scaling.A, scaling.q, scaling.l, scaling.u
    else:
        P, A, q, l, u = prog.P, prog.A, prog.q, prog.l, prog.u

    rho_bar = opts.rho
    eq = prog.l == prog.u
    def rho_vector(r):
        vec = np.full(m, r)
        vec[eq] = np.minimum(r * _RHO_EQ_BOOST, opts.rho_max)
        return vec

    rho_vec = rho_vector(rho_bar)
    lu_fact = _factor_kkt(P, A, opts.sigma, rho_vec)

    x = np.zeros(n)
    z = np.clip(np.zeros(m), l, u)
    y = np.zeros(m)
    last_polish_try = 0
    polish_backoff = 1

    def unscaled(xs, ys):
        if scaling is None:
            return xs, ys
        return scaling.unscale_x(xs), scaling.unscale_y(ys)

    def make_report(status, xs, ys, it, polished=False, cert=None):
        xu, yu = unscaled(xs, ys)
        rp, rd = _residuals(prog, xu, yu)
        return SolveReport(
            status=status, x=xu, y=yu, objective=prog.objective(xu),
            iterations=it, primal_residual=rp, dual_residual=rd,
            polished=polished, certificate=cert,
        )

    for it in range(1, opts.max_iters + 1):
        rhs = np.concatenate([opts.sigma * x - q, z - y / rho_vec])
        sol = lu_fact.solve(rhs)
        x_tilde, nu = sol[:n], sol[n:]
        z_tilde = z + (nu - y) / rho_vec
        x_prev, z_prev, y_prev = x, z, y
        x = opts.alpha * x_tilde + (1 - opts.alpha) * x_prev
        w = opts.alpha * z_tilde + (1 - opts.alpha) * z_prev + y_prev / rho_vec
        low_clip = w < l
        upp_clip = w > u
        z = np.clip(w, l, u)
        y = rho_vec * (w - z)

        if it % opts.check_every != 0 and it != opts.max_iters:
            continue

        xu, yu = unscaled(x, y)
        r_prim, r_dual = _residuals(prog, xu, yu)
        Ax = prog.A @ xu
        eps_prim = opts.eps_abs + opts.eps_rel * max(_norm_inf(Ax), _norm_inf(np.clip(Ax, prog.l, prog.u)))
        eps_dual = opts.eps_abs + opts.eps_rel * max(
            _norm_inf(prog.P @ xu), _norm_inf(prog.A.T @ yu), _norm_inf(prog.q)
        )

        if r_prim <= eps_prim and r_dual <= eps_dual:
            if opts.polish:
                pol = _polish(prog, low_clip, upp_clip, opts)
                if pol is not None:
                    rp, rd = _residuals(prog, pol[0], pol[1])
                    if rp <= max(r_prim, opts.eps_abs) and rd <= max(r_dual, opts.eps_abs):
                        xp, yp = pol
                        return SolveReport(
                            status=OPTIMAL, x=xp, y=yp, objective=prog.objective(xp),
                            iterations=it, primal_residual=rp, dual_residual=rd,
                            polished=True,
                        )
            return make_report(OPTIMAL, x, y, it)

        if _infeasibility_certificate(prog, scaling, y - y_prev, opts):
            cert = scaling.e * (y - y_prev) / scaling.c if scaling else (y - y_prev)
            return make_report(PRIMAL_INFEASIBLE, x, y, it, cert=cert)

        # high-accuracy LP solutions usually come from the polish step, so try
        # it as soon as the primal iterate is close rather than grinding to
        # eps; the active set is read off the primal, so a lagging dual is
        # fine. Failed attempts back off exponentially to bound their cost.
        if (opts.polish and r_prim <= opts.early_polish_tol
                and it - last_polish_try >= opts.early_polish_every * polish_backoff):
            last_polish_try = it
            pol = _polish(prog, low_clip, upp_clip, opts)
            accepted = False
            if pol is not None:
                rp, rd = _residuals(prog, pol[0], pol[1])
                if rp <= eps_prim and rd <= eps_dual:
                    accepted = True
            if accepted:
                xp, yp = pol
                return SolveReport(
                    status=OPTIMAL, x=xp, y=yp, objective=prog.objective(xp),
                    iterations=it, primal_residual=rp, dual_residual=rd,
                    polished=True,
                )
            polish_backoff = min(polish_backoff * 2, 8)

        if it % opts.adapt_every == 0:
            # residual balancing on scaled quantities
            zs = A @ x
            rp_s = _norm_inf(zs - z)
            rd_s = _norm_inf(P @ x + q + A.T @ y)
            rp_rel = rp_s / max(_norm_inf(zs), _norm_inf(z), 1e-10)
            rd_rel = rd_s / max(_norm_inf(P @ x), _norm_inf(A.T @ y), _norm_inf(q), 1e-10)
            ratio = np.sqrt(rp_rel / max(rd_rel, 1e-16))
            new_rho = float(np.clip(rho_bar * ratio, opts.rho_min, opts.rho_max))
            if new_rho > 5 * rho_bar or new_rho < rho_bar / 5:
                rho_bar = new_rho
                rho_vec = rho_vector(rho_bar)
                lu_fact = _factor_kkt(P, A, opts.sigma, rho_vec)

    return make_report(MAX_ITERS, x, y, opts.max_iters)


def feasibility(prog: SparseConvexProgram, opts: Optional[SolverOptions] = None) -> FeasibilityResult:
    """Phase-style feasibility check: solve with a zero objective."""
    opts = opts or SolverOptions()
    zero = SparseConvexProgram(
        nvar=prog.nvar, q=np.zeros(prog.nvar), A=prog.A, l=prog.l, u=prog.u
    )
    report = solve(zero, opts)
    if report.status == OPTIMAL:
        return FeasibilityResult(True, report.x, report.status, report.primal_residual)
    if report.status == PRIMAL_INFEASIBLE:
        return FeasibilityResult(False, None, report.status, report.primal_residual)
    # ran out of iterations: classify by the final constraint violation
    feas = report.primal_residual <= 1e-6
    return FeasibilityResult(feas, report.x if feas else None, report.status,
                             report.primal_residual)
