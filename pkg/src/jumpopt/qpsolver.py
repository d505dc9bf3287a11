"""Dense convex quadratic programming.

    minimize    0.5 x' W x + f' x
    subject to  A_eq x  = b_eq
                A_in x >= b_in

Primal active-set method; equalities are eliminated once through a QR
nullspace factorization, inequalities are handled by a working-set loop
on the reduced problem.  A rank-deficient W is regularized by reg*I
(recorded on the solution).  Infeasible starts go through an exact-penalty
phase-1 with a single elastic variable.

Deterministic: identical inputs produce identical outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"


@dataclass
class QpProblem:
    W: np.ndarray
    f: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    warm_start: np.ndarray | None = None
    warm_active: list[int] | None = None

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.W = 0.5 * (self.W + self.W.T)
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        n = self.f.shape[0]
        if self.W.shape != (n, n):
            raise ValueError(f"W shape {self.W.shape} does not match f length {n}")
        if self.A_eq is not None:
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
            if self.A_eq.shape != (self.b_eq.shape[0], n):
                raise ValueError("equality system dimensions are inconsistent")
        if self.A_in is not None:
            self.A_in = np.atleast_2d(np.asarray(self.A_in, dtype=float))
            self.b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
            if self.A_in.shape != (self.b_in.shape[0], n):
                raise ValueError("inequality system dimensions are inconsistent")

    @property
    def n(self) -> int:
        return self.f.shape[0]


@dataclass
class QpSolution:
    x: np.ndarray
    status: str
    duals_eq: np.ndarray
    duals_in: np.ndarray
    kkt_residual: float
    iterations: int
    reg: float
    active_set: list[int] = field(default_factory=list)


@dataclass
class QpOptions:
    tol: float = 1e-9
    max_iter: int = 200
    reg: float = 1e-10


def solve(problem: QpProblem, opts: QpOptions | None = None) -> QpSolution:
    opts = opts or QpOptions()
    n = problem.n
    Wr = problem.W + opts.reg * np.eye(n)
    f = problem.f

    # eliminate equalities: x = x_p + Z y (QR of A', min-norm particular point)
    eq_qr = None
    if problem.A_eq is not None and problem.A_eq.shape[0] > 0:
        A, b = problem.A_eq, problem.b_eq
        m = A.shape[0]
        Q, R = np.linalg.qr(A.T, mode="complete")
        diag = np.abs(np.diag(R[:m, :m])) if m else np.zeros(0)
        rank = int(np.sum(diag > 1e-11 * max(1.0, diag.max() if diag.size else 1.0)))
        if rank == m:
            x_p = Q[:, :m] @ solve_triangular(R[:m, :m], b, trans="T")
        else:
            x_p, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.abs(A @ x_p - b).max() > 1e-8 * max(1.0, np.abs(b).max()):
            return _finish(problem, x_p, INFEASIBLE, [], np.zeros(0), 0, opts, eq_qr)
        Z = Q[:, rank:]
        eq_qr = (Q, R, rank)
    else:
        x_p = np.zeros(n)
        Z = np.eye(n)
    nz = Z.shape[1]

    if problem.A_in is not None and problem.A_in.shape[0] > 0:
        G = problem.A_in @ Z
        h = problem.b_in - problem.A_in @ x_p
    else:
        G = np.zeros((0, nz))
        h = np.zeros(0)

    Qr = Z.T @ (Wr @ Z)
    cr = Z.T @ (Wr @ x_p + f)

    if nz == 0:
        # fully determined by equalities
        status = OPTIMAL if _ineq_ok(G, h, np.zeros(0)) else INFEASIBLE
        return _finish(problem, x_p, status, [], np.zeros(0), 0, opts, eq_qr)

    if problem.warm_start is not None:
        y0 = Z.T @ (np.asarray(problem.warm_start, dtype=float) - x_p)
    else:
        y0 = np.linalg.solve(Qr, -cr)

    warm_rows = [i for i in (problem.warm_active or []) if 0 <= i < G.shape[0]]
    if not _ineq_ok(G, h, y0):
        y0, ok = _phase1(Qr.shape[0], G, h, y0, opts)
        if not ok:
            x = x_p + Z @ y0
            return _finish(problem, x, INFEASIBLE, [], np.zeros(0), 0, opts, eq_qr)
        warm_rows = [i for i in range(G.shape[0]) if G[i] @ y0 - h[i] < 1e-9]

    y, lam_w, working, iters, capped = _active_set(Qr, cr, G, h, y0, warm_rows, opts)
    x = x_p + Z @ y
    status = MAX_ITER if capped else OPTIMAL
    return _finish(problem, x, status, working, lam_w, iters, opts, eq_qr)


def _ineq_ok(G, h, y, tol=1e-9):
    return G.shape[0] == 0 or (G @ y - h).min() >= -tol


def _phase1(nz, G, h, y0, opts: QpOptions):
    """Minimize an exact penalty on the worst violation via one elastic."""
    viol = float(max(0.0, (h - G @ y0).max())) if G.shape[0] else 0.0
    big = 1e6 * max(1.0, viol)
    for _ in range(3):
        Q1 = np.eye(nz + 1)
        Q1[-1, -1] = 1e-8
        c1 = np.concatenate([-y0, [big]])
        G1 = np.hstack([G, np.ones((G.shape[0], 1))])
        G1 = np.vstack([G1, np.concatenate([np.zeros(nz), [1.0]])])
        h1 = np.concatenate([h, [0.0]])
        start = np.concatenate([y0, [viol + 1.0]])
        y, _, _, _, capped = _active_set(Q1, c1, G1, h1, start, [], opts)
        if y[-1] <= 1e-8 and not capped:
            return y[:-1], True
        big *= 100.0
    return y0, False


def _active_set(Q, c, G, h, y, working_init, opts: QpOptions):
    """Primal active-set loop from a feasible y; returns duals of the final set."""
    m = G.shape[0]
    working: list[int] = list(dict.fromkeys(working_init))
    lam = np.zeros(len(working))
    for it in range(1, opts.max_iter + 1):
        Gw = G[working] if working else np.zeros((0, Q.shape[0]))
        k = len(working)
        K = np.zeros((Q.shape[0] + k, Q.shape[0] + k))
        K[: Q.shape[0], : Q.shape[0]] = Q
        if k:
            K[: Q.shape[0], Q.shape[0]:] = Gw.T
            K[Q.shape[0]:, : Q.shape[0]] = Gw
        # bottom block restores exact activity of the working rows
        rhs = np.concatenate([-(Q @ y + c), h[working] - Gw @ y if k else np.zeros(0)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        p = sol[: Q.shape[0]]
        lam = -sol[Q.shape[0]:]  # block solve yields the negated multipliers

        pmax = float(np.abs(p).max()) if p.size else 0.0
        if pmax <= 1e-11 * max(1.0, float(np.abs(y).max())):
            if k == 0 or lam.min() >= -1e-11:
                return y, lam, working, it, False
            working.pop(int(np.argmin(lam)))
            continue

        alpha = 1.0
        blocking = -1
        if m:
            gp = G @ p
            res = G @ y - h
            for i in range(m):
                if i in working or gp[i] >= -1e-13:
                    continue
                ai = res[i] / (-gp[i])
                if ai < alpha - 1e-15:
                    alpha = max(ai, 0.0)
                    blocking = i
        y = y + alpha * p
        if blocking >= 0:
            working.append(blocking)
    return y, lam, working, opts.max_iter, True


def _finish(problem, x, status, working, lam_w, iters, opts: QpOptions, eq_qr=None) -> QpSolution:
    n = problem.n
    lam = np.zeros(problem.A_in.shape[0] if problem.A_in is not None else 0)
    for idx, row in enumerate(working):
        if row < lam.shape[0]:
            lam[row] = lam_w[idx] if idx < len(lam_w) else 0.0
    grad = (problem.W + opts.reg * np.eye(n)) @ x + problem.f
    if problem.A_in is not None and problem.A_in.shape[0]:
        grad = grad - problem.A_in.T @ lam
    if problem.A_eq is not None and problem.A_eq.shape[0]:
        m = problem.A_eq.shape[0]
        if eq_qr is not None and eq_qr[2] == m:
            Q, R, rank = eq_qr
            nu = solve_triangular(R[:m, :m], Q[:, :m].T @ grad)
        else:
            nu, *_ = np.linalg.lstsq(problem.A_eq.T, grad, rcond=None)
        grad = grad - problem.A_eq.T @ nu
        eq_viol = float(np.abs(problem.A_eq @ x - problem.b_eq).max())
    else:
        nu = np.zeros(0)
        eq_viol = 0.0
    if problem.A_in is not None and problem.A_in.shape[0]:
        slack = problem.A_in @ x - problem.b_in
        in_viol = float(max(0.0, -slack.min()))
        comp = float(np.abs(lam * slack).max())
        dual_viol = float(max(0.0, -lam.min()))
    else:
        in_viol = comp = dual_viol = 0.0
    scale = max(1.0, float(np.abs(problem.f).max()) if problem.f.size else 1.0,
                float(np.abs(problem.W @ x).max()))
    kkt = max(float(np.abs(grad).max()) / scale, eq_viol, in_viol, comp / scale, dual_viol)
    if status == OPTIMAL and kkt > opts.tol:
        status = MAX_ITER
    return QpSolution(
        x=x,
        status=status,
        duals_eq=nu,
        duals_in=lam,
        kkt_residual=kkt,
        iterations=iters,
        reg=opts.reg,
        active_set=list(working),
    )
