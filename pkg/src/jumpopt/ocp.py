"""Trapezoidal direct collocation and a sequential-quadratic-programming
solver over it, with the dense active-set QP as the subproblem solver.

Decision vector: z = [s_0 .. s_{N-1} | u_0 .. u_{N-1} | (T)], with the
final time T present only for free-time problems.  Dynamics enter as
trapezoidal defects; path/endpoint functions may carry lower == upper to
express equalities.  All knot-wise callables are batched: they map
(S (B,ns), U (B,nu)) -> (B, m).  Constraint jacobians default to forward
differences with step 1e-7 unless an analytic jacobian is registered;
linear dynamics with fixed T produce constant defect rows that are
factored out of the per-iteration work.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import qpsolver
from .errors import SolverFailure

FD_STEP = 1e-7


@dataclass
class RunningCost:
    """Sum over knots of |r(s_k, u_k)|^2_W (terminal=True: last knot only)."""

    residual: "callable"
    weight: np.ndarray
    terminal: bool = False
    jacobian: "callable | None" = None   # optional (S, U) -> (B, m, ns+nu)


@dataclass
class PathConstraint:
    fun: "callable"                       # batched (S, U) -> (B, m)
    lower: np.ndarray
    upper: np.ndarray
    jacobian: "callable | None" = None


@dataclass
class EndpointConstraint:
    fun: "callable"                       # (s_end,) -> (m,)
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class LinearDynamics:
    """sdot = A s + B u + c; makes fixed-time defects constant rows."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray


@dataclass
class OcpSpec:
    state_dim: int
    control_dim: int
    n_knots: int
    dynamics: "callable | LinearDynamics"     # batched f(S, U) -> (B, ns)
    time: tuple                               # ("fixed", T) | ("free", tmin, tmax, tguess)
    running_costs: list[RunningCost] = field(default_factory=list)
    path_constraints: list[PathConstraint] = field(default_factory=list)
    endpoint_constraints: list[EndpointConstraint] = field(default_factory=list)
    initial_state: np.ndarray | None = None
    state_lower: np.ndarray | None = None
    state_upper: np.ndarray | None = None
    control_lower: np.ndarray | None = None
    control_upper: np.ndarray | None = None
    time_weight: float = 0.0
    dynamics_jacobian: "callable | None" = None   # (S, U) -> (A (B,ns,ns), B (B,ns,nu))
    guess_states: np.ndarray | None = None        # (N, ns)
    guess_controls: np.ndarray | None = None      # (N, nu)

    def validate(self):
        if self.n_knots < 10:
            raise ValueError("n_knots must be at least 10")
        for name in ("state_lower", "state_upper", "control_lower", "control_upper"):
            arr = getattr(self, name)
            if arr is not None and np.any(np.isnan(arr)):
                raise ValueError(f"{name} contains NaN")
        if self.time[0] not in ("fixed", "free"):
            raise ValueError("time must be ('fixed', T) or ('free', tmin, tmax, tguess)")


@dataclass
class OcpSolution:
    states: np.ndarray        # (N, ns)
    controls: np.ndarray      # (N, nu)
    knot_times: np.ndarray    # (N,)
    objective: float
    constraint_violation: float
    iterations: int
    status: str               # "converged" | "max_iter" | "failed"
    final_time: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class CollocationNlp:
    """Transcribed problem exposing the pieces the SQP loop needs."""

    def __init__(self, spec: OcpSpec):
        spec.validate()
        self.spec = spec
        ns, nu, N = spec.state_dim, spec.control_dim, spec.n_knots
        self.ns, self.nu, self.N = ns, nu, N
        self.free_time = spec.time[0] == "free"
        self.n = N * (ns + nu) + (1 if self.free_time else 0)
        self.iT = self.n - 1 if self.free_time else None
        self._linear = isinstance(spec.dynamics, LinearDynamics)

        lb = np.full(self.n, -np.inf)
        ub = np.full(self.n, np.inf)
        if spec.state_lower is not None:
            lb[: N * ns] = np.tile(spec.state_lower, N)
            ub[: N * ns] = np.tile(spec.state_upper, N)
        if spec.control_lower is not None:
            lb[N * ns: N * (ns + nu)] = np.tile(spec.control_lower, N)
            ub[N * ns: N * (ns + nu)] = np.tile(spec.control_upper, N)
        if self.free_time:
            lb[self.iT], ub[self.iT] = spec.time[1], spec.time[2]
        if spec.initial_state is not None:
            s0 = np.asarray(spec.initial_state, dtype=float)
            lb[:ns] = np.minimum(lb[:ns], s0)
            ub[:ns] = np.maximum(ub[:ns], s0)
        self.lb, self.ub = lb, ub

        self.lin_A, self.lin_b = self._build_linear_rows()

    # ------------------------------------------------------------- layout

    def s_idx(self, k):
        return slice(k * self.ns, (k + 1) * self.ns)

    def u_idx(self, k):
        off = self.N * self.ns
        return slice(off + k * self.nu, off + (k + 1) * self.nu)

    def pack(self, S, U, T=None) -> np.ndarray:
        z = np.zeros(self.n)
        z[: self.N * self.ns] = np.asarray(S, dtype=float).ravel()
        z[self.N * self.ns: self.N * (self.ns + self.nu)] = np.asarray(U, dtype=float).ravel()
        if self.free_time:
            z[self.iT] = self.spec.time[3] if T is None else T
        return z

    def unpack(self, z):
        S = z[: self.N * self.ns].reshape(self.N, self.ns)
        U = z[self.N * self.ns: self.N * (self.ns + self.nu)].reshape(self.N, self.nu)
        T = z[self.iT] if self.free_time else self.spec.time[1]
        return S, U, float(T)

    def initial_guess(self) -> np.ndarray:
        spec = self.spec
        S = spec.guess_states if spec.guess_states is not None else np.zeros((self.N, self.ns))
        U = spec.guess_controls if spec.guess_controls is not None else np.zeros((self.N, self.nu))
        if spec.initial_state is not None and spec.guess_states is None:
            S = np.tile(spec.initial_state, (self.N, 1))
        return self.pack(S, U)

    # ------------------------------------------------- constant linear rows

    def _build_linear_rows(self):
        """Initial-state pin plus (for linear dynamics, fixed T) the defects."""
        rows, rhs = [], []
        ns, nu, N = self.ns, self.nu, self.N
        if self.spec.initial_state is not None:
            A0 = np.zeros((ns, self.n))
            A0[:, :ns] = np.eye(ns)
            rows.append(A0)
            rhs.append(np.asarray(self.spec.initial_state, dtype=float))
        if self._linear and not self.free_time:
            dyn = self.spec.dynamics
            dt = self.spec.time[1] / (N - 1)
            Ad, Bd, cd = dyn.A, dyn.B, dyn.c
            D = np.zeros(((N - 1) * ns, self.n))
            r = np.zeros((N - 1) * ns)
            for k in range(N - 1):
                br = slice(k * ns, (k + 1) * ns)
                D[br, self.s_idx(k)] = -np.eye(ns) - 0.5 * dt * Ad
                D[br, self.s_idx(k + 1)] = np.eye(ns) - 0.5 * dt * Ad
                D[br, self.u_idx(k)] = -0.5 * dt * Bd
                D[br, self.u_idx(k + 1)] = -0.5 * dt * Bd
                r[br] = dt * cd
            rows.append(D)
            rhs.append(r)
        if rows:
            return np.vstack(rows), np.concatenate(rhs)
        return np.zeros((0, self.n)), np.zeros(0)

    # ------------------------------------------------------------ dynamics

    def _dyn_values(self, S, U):
        if self._linear:
            d = self.spec.dynamics
            return S @ d.A.T + U @ d.B.T + d.c
        return self.spec.dynamics(S, U)

    def _dyn_jacobians(self, S, U):
        if self._linear:
            d = self.spec.dynamics
            A = np.broadcast_to(d.A, (self.N, self.ns, self.ns))
            B = np.broadcast_to(d.B, (self.N, self.ns, self.nu))
            return A, B
        if self.spec.dynamics_jacobian is not None:
            return self.spec.dynamics_jacobian(S, U)
        return self._fd_dynamics_jacobian(S, U)

    def _fd_dynamics_jacobian(self, S, U):
        N, ns, nu = self.N, self.ns, self.nu
        base = self.spec.dynamics(S, U)
        Sb, Ub = _perturbation_batch(S, U, FD_STEP)
        vals = self.spec.dynamics(Sb, Ub).reshape(N, ns + nu, ns)
        J = (vals - base[:, None, :]) / FD_STEP
        return J[:, :ns, :].transpose(0, 2, 1), J[:, ns:, :].transpose(0, 2, 1)

    def eval_defects(self, z):
        """Nonlinear defect rows (empty when defects are constant/linear)."""
        if self._linear and not self.free_time:
            return np.zeros(0), np.zeros((0, self.n))
        S, U, T = self.unpack(z)
        N, ns, nu = self.N, self.ns, self.nu
        dt = T / (N - 1)
        f = self._dyn_values(S, U)
        c = (S[1:] - S[:-1] - 0.5 * dt * (f[:-1] + f[1:])).ravel()
        Aj, Bj = self._dyn_jacobians(S, U)
        J = np.zeros(((N - 1) * ns, self.n))
        eye = np.eye(ns)
        for k in range(N - 1):
            br = slice(k * ns, (k + 1) * ns)
            J[br, self.s_idx(k)] = -eye - 0.5 * dt * Aj[k]
            J[br, self.s_idx(k + 1)] = eye - 0.5 * dt * Aj[k + 1]
            J[br, self.u_idx(k)] = -0.5 * dt * Bj[k]
            J[br, self.u_idx(k + 1)] = -0.5 * dt * Bj[k + 1]
            if self.free_time:
                J[br, self.iT] = -0.5 / (N - 1) * (f[k] + f[k + 1])
        return c, J

    # --------------------------------------------------- path and endpoint

    def eval_path(self, z):
        """Stacked path rows split into equalities (lb==ub) and c >= 0 rows."""
        S, U, T = self.unpack(z)
        eq_c, eq_J, in_c, in_J = [], [], [], []
        for pc in self.spec.path_constraints:
            g = pc.fun(S, U)
            J = self._path_jacobian(pc, S, U, g)
            m = g.shape[1]
            is_eq = np.isfinite(pc.lower) & (pc.lower == pc.upper)
            for j in range(m):
                rows = J[:, j, :]
                big = np.zeros((self.N, self.n))
                for k in range(self.N):
                    big[k, self.s_idx(k)] = rows[k, : self.ns]
                    big[k, self.u_idx(k)] = rows[k, self.ns:]
                if is_eq[j]:
                    eq_c.append(g[:, j] - pc.lower[j])
                    eq_J.append(big)
                else:
                    if np.isfinite(pc.lower[j]):
                        in_c.append(g[:, j] - pc.lower[j])
                        in_J.append(big)
                    if np.isfinite(pc.upper[j]):
                        in_c.append(pc.upper[j] - g[:, j])
                        in_J.append(-big)
        cat = lambda cs, js: (
            (np.concatenate(cs), np.vstack(js)) if cs else (np.zeros(0), np.zeros((0, self.n)))
        )
        return cat(eq_c, eq_J) + cat(in_c, in_J)

    def _path_jacobian(self, pc: PathConstraint, S, U, g0):
        """(N, m, ns+nu); analytic jacobians must use the same layout."""
        if pc.jacobian is not None:
            return pc.jacobian(S, U)
        Sb, Ub = _perturbation_batch(S, U, FD_STEP)
        vals = pc.fun(Sb, Ub).reshape(self.N, self.ns + self.nu, -1)
        return ((vals - g0[:, None, :]) / FD_STEP).transpose(0, 2, 1)

    def eval_endpoint(self, z):
        S, U, T = self.unpack(z)
        s_end = S[-1]
        eq_c, eq_J, in_c, in_J = [], [], [], []
        for ec in self.spec.endpoint_constraints:
            h0 = np.atleast_1d(np.asarray(ec.fun(s_end), dtype=float))
            Jloc = np.zeros((h0.shape[0], self.ns))
            for i in range(self.ns):
                e = np.zeros(self.ns)
                e[i] = FD_STEP
                Jloc[:, i] = (np.atleast_1d(ec.fun(s_end + e)) - h0) / FD_STEP
            big = np.zeros((h0.shape[0], self.n))
            big[:, self.s_idx(self.N - 1)] = Jloc
            lower = np.atleast_1d(ec.lower)
            upper = np.atleast_1d(ec.upper)
            for j in range(h0.shape[0]):
                if np.isfinite(lower[j]) and lower[j] == upper[j]:
                    eq_c.append(h0[j] - lower[j])
                    eq_J.append(big[j])
                else:
                    if np.isfinite(lower[j]):
                        in_c.append(h0[j] - lower[j])
                        in_J.append(big[j])
                    if np.isfinite(upper[j]):
                        in_c.append(upper[j] - h0[j])
                        in_J.append(-big[j])
        cat = lambda cs, js: (
            (np.array(cs), np.vstack(js)) if cs else (np.zeros(0), np.zeros((0, self.n)))
        )
        return cat(eq_c, eq_J) + cat(in_c, in_J)

    # ---------------------------------------------------------------- cost

    def eval_cost(self, z):
        """Objective, gradient and Gauss-Newton Hessian."""
        S, U, T = self.unpack(z)
        F = 0.0
        g = np.zeros(self.n)
        Hess = np.zeros((self.n, self.n))
        for rc in self.spec.running_costs:
            W = np.atleast_1d(np.asarray(rc.weight, dtype=float))
            knots = [self.N - 1] if rc.terminal else range(self.N)
            r0 = rc.residual(S, U)
            J = self._cost_jacobian(rc, S, U, r0)
            for k in knots:
                rk = r0[k]
                Jk = J[k]
                Wr = (W * rk) if W.ndim == 1 else (W @ rk)
                F += float(rk @ Wr)
                JW = (Jk.T * W) if W.ndim == 1 else Jk.T @ W
                gk = 2.0 * (JW @ rk)
                Hk = 2.0 * (JW @ Jk)
                sl_s, sl_u = self.s_idx(k), self.u_idx(k)
                g[sl_s] += gk[: self.ns]
                g[sl_u] += gk[self.ns:]
                Hess[sl_s, sl_s] += Hk[: self.ns, : self.ns]
                Hess[sl_s, sl_u] += Hk[: self.ns, self.ns:]
                Hess[sl_u, sl_s] += Hk[self.ns:, : self.ns]
                Hess[sl_u, sl_u] += Hk[self.ns:, self.ns:]
        if self.free_time and self.spec.time_weight > 0.0:
            w = self.spec.time_weight
            F += w * T * T
            g[self.iT] += 2.0 * w * T
            Hess[self.iT, self.iT] += 2.0 * w
        return F, g, Hess

    def _cost_jacobian(self, rc: RunningCost, S, U, r0):
        """(N, m, ns+nu); analytic jacobians must use the same layout."""
        if rc.jacobian is not None:
            return rc.jacobian(S, U)
        Sb, Ub = _perturbation_batch(S, U, FD_STEP)
        vals = rc.residual(Sb, Ub).reshape(self.N, self.ns + self.nu, -1)
        return ((vals - r0[:, None, :]) / FD_STEP).transpose(0, 2, 1)

    # -------------------------------------------------- combined interface

    def eval_eq(self, z):
        cd, Jd = self.eval_defects(z)
        pe, Je, pi, Ji = self.eval_path(z)
        ee, Jee, ei, Jei = self.eval_endpoint(z)
        c = np.concatenate([cd, pe, ee])
        J = np.vstack([Jd, Je, Jee])
        ci = np.concatenate([pi, ei])
        Jin = np.vstack([Ji, Jei])
        return c, J, ci, Jin


@dataclass
class SqpOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-5
    max_iter: int = 300
    qp_max_iter: int = 400
    hessian_reg: float = 1e-8
    merit_mu0: float = 10.0
    log_csv: str | None = None


def transcribe(spec: OcpSpec) -> CollocationNlp:
    """Build the collocated problem for :func:`solve_sqp`."""
    return CollocationNlp(spec)


def solve_sqp(nlp: CollocationNlp, opts: SqpOptions | None = None) -> OcpSolution:
    """SQP with an l1 merit line search and one elastic retry on QP failure."""
    opts = opts or SqpOptions()
    z, status, iters_done, feas, F = _sqp_loop(nlp, opts)
    S, U, T = nlp.unpack(z)
    dt = T / (nlp.N - 1)
    return OcpSolution(
        states=S,
        controls=U,
        knot_times=np.arange(nlp.N) * dt,
        objective=float(F),
        constraint_violation=float(feas),
        iterations=iters_done,
        status=status,
        final_time=float(T),
    )


class GenericNlp:
    """Small dense NLP in the same shape the SQP loop consumes.

    cost is a residual list |r(x)|^2 (Gauss-Newton); eq/ineq are plain
    callables with FD jacobians.
    """

    def __init__(self, n, residual, x0, eq=None, ineq=None, lb=None, ub=None):
        self.n = n
        self._residual = residual
        self._eq = eq
        self._ineq = ineq
        self._x0 = np.asarray(x0, dtype=float)
        self.lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
        self.ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
        self.lin_A = np.zeros((0, n))
        self.lin_b = np.zeros(0)

    def initial_guess(self):
        return self._x0.copy()

    def eval_cost(self, z):
        r = np.atleast_1d(self._residual(z))
        J = _fd_jac(self._residual, z, r)
        return float(r @ r), 2.0 * J.T @ r, 2.0 * J.T @ J

    def eval_eq(self, z):
        if self._eq is not None:
            c = np.atleast_1d(self._eq(z))
            J = _fd_jac(self._eq, z, c)
        else:
            c, J = np.zeros(0), np.zeros((0, self.n))
        if self._ineq is not None:
            ci = np.atleast_1d(self._ineq(z))
            Ji = _fd_jac(self._ineq, z, ci)
        else:
            ci, Ji = np.zeros(0), np.zeros((0, self.n))
        return c, J, ci, Ji


def _fd_jac(fun, z, f0):
    J = np.zeros((f0.shape[0], z.shape[0]))
    for i in range(z.shape[0]):
        e = np.zeros_like(z)
        e[i] = FD_STEP
        J[:, i] = (np.atleast_1d(fun(z + e)) - f0) / FD_STEP
    return J


def solve_generic(nlp: GenericNlp, opts: SqpOptions | None = None):
    """Run the SQP loop on a generic NLP; returns (x, status, iterations)."""
    opts = opts or SqpOptions()
    z, status, iters, feas, F = _sqp_loop(nlp, opts)
    return z, status, iters


def _sqp_loop(nlp, opts: SqpOptions):
    z = nlp.initial_guess().astype(float)
    z = np.clip(z, nlp.lb, nlp.ub)
    mu = opts.merit_mu0
    log_rows = []
    status = "max_iter"
    iters_done = 0

    for it in range(1, opts.max_iter + 1):
        F, g, Hess = nlp.eval_cost(z)
        ceq, Jeq, cin, Jin = nlp.eval_eq(z)
        r_lin = nlp.lin_A @ z - nlp.lin_b if nlp.lin_A.shape[0] else np.zeros(0)
        feas = _feasibility(nlp, z, ceq, cin, r_lin)

        p, duals, qp_ok = _solve_qp_step(nlp, z, g, Hess, ceq, Jeq, cin, Jin, r_lin, opts)
        if not qp_ok:
            status = "failed"
            break
        step = float(np.abs(p).max()) if p.size else 0.0
        if feas <= opts.feas_tol and step <= opts.opt_tol * (1.0 + float(np.abs(z).max())):
            status = "converged"
            break

        mu = max(mu, 1.5 * duals + 1.0)
        merit0 = F + mu * _viol1(nlp, z, ceq, cin, r_lin)
        deriv = float(g @ p) - mu * _viol1(nlp, z, ceq, cin, r_lin)
        alpha = 1.0
        accepted = False
        for _ in range(30):
            z_try = np.clip(z + alpha * p, nlp.lb, nlp.ub)
            F_t, _, _ = nlp.eval_cost(z_try)
            ceq_t, _, cin_t, _ = nlp.eval_eq(z_try)
            r_lin_t = nlp.lin_A @ z_try - nlp.lin_b if nlp.lin_A.shape[0] else np.zeros(0)
            merit_t = F_t + mu * _viol1(nlp, z_try, ceq_t, cin_t, r_lin_t)
            if merit_t <= merit0 + 1e-4 * alpha * min(deriv, 0.0) or merit_t < merit0 - 1e-14:
                z = z_try
                accepted = True
                break
            alpha *= 0.5
        iters_done = it
        if not accepted:
            # keep the best reduction seen; if feasible already, declare done
            if feas <= opts.feas_tol:
                status = "converged"
                break
            mu *= 10.0
            if mu > 1e12:
                status = "failed"
                break
        if opts.log_csv:
            log_rows.append((it, F, feas, alpha))

    S, U, T = nlp.unpack(z)
    ceq, _, cin, _ = nlp.eval_eq(z)
    r_lin = nlp.lin_A @ z - nlp.lin_b if nlp.lin_A.shape[0] else np.zeros(0)
    feas = _feasibility(nlp, z, ceq, cin, r_lin)
    F, _, _ = nlp.eval_cost(z)
    if status == "converged" and feas > opts.feas_tol:
        status = "failed"
    if opts.log_csv:
        with open(opts.log_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "objective", "feasibility", "step_length"])
            writer.writerows(log_rows)
    dt = T / (nlp.N - 1)
    return OcpSolution(
        states=S,
        controls=U,
        knot_times=np.arange(nlp.N) * dt,
        objective=float(F),
        constraint_violation=float(feas),
        iterations=iters_done,
        status=status,
        final_time=float(T),
    )


def _viol1(nlp, z, ceq, cin, r_lin):
    v = float(np.abs(ceq).sum()) + float(np.abs(r_lin).sum())
    if cin.size:
        v += float(np.maximum(0.0, -cin).sum())
    v += float(np.maximum(0.0, nlp.lb - z).sum() + np.maximum(0.0, z - nlp.ub).sum())
    return v


def _feasibility(nlp, z, ceq, cin, r_lin):
    parts = [0.0]
    if ceq.size:
        parts.append(float(np.abs(ceq).max()))
    if r_lin.size:
        parts.append(float(np.abs(r_lin).max()))
    if cin.size:
        parts.append(float(max(0.0, -cin.min())))
    parts.append(float(np.maximum(0.0, nlp.lb - z).max(initial=0.0)))
    parts.append(float(np.maximum(0.0, z - nlp.ub).max(initial=0.0)))
    return max(parts)


def _solve_qp_step(nlp, z, g, Hess, ceq, Jeq, cin, Jin, r_lin, opts: SqpOptions):
    n = nlp.n
    H = Hess + opts.hessian_reg * np.eye(n)
    A_eq_rows = []
    b_eq_rows = []
    if nlp.lin_A.shape[0]:
        A_eq_rows.append(nlp.lin_A)
        b_eq_rows.append(-r_lin)
    if ceq.size:
        A_eq_rows.append(Jeq)
        b_eq_rows.append(-ceq)
    A_eq = np.vstack(A_eq_rows) if A_eq_rows else None
    b_eq = np.concatenate(b_eq_rows) if A_eq_rows else None

    in_rows = []
    in_rhs = []
    if cin.size:
        in_rows.append(Jin)
        in_rhs.append(-cin)
    finite_lb = np.isfinite(nlp.lb)
    finite_ub = np.isfinite(nlp.ub)
    if finite_lb.any():
        E = np.eye(n)[finite_lb]
        in_rows.append(E)
        in_rhs.append(nlp.lb[finite_lb] - z[finite_lb])
    if finite_ub.any():
        E = -np.eye(n)[finite_ub]
        in_rows.append(E)
        in_rhs.append(z[finite_ub] - nlp.ub[finite_ub])
    A_in = np.vstack(in_rows) if in_rows else None
    b_in = np.concatenate(in_rhs) if in_rows else None

    qopts = qpsolver.QpOptions(tol=1e-7, max_iter=opts.qp_max_iter, reg=1e-10)
    sol = qpsolver.solve(
        qpsolver.QpProblem(W=H, f=g, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in), qopts
    )
    if sol.status == "infeasible":
        # one elastic retry: nonlinear equalities become a quadratic penalty
        H2 = H.copy()
        g2 = g.copy()
        if ceq.size:
            wpen = 1e6
            H2 += 2.0 * wpen * (Jeq.T @ Jeq)
            g2 += 2.0 * wpen * (Jeq.T @ ceq)
        A_lin = nlp.lin_A if nlp.lin_A.shape[0] else None
        b_lin = -r_lin if nlp.lin_A.shape[0] else None
        sol = qpsolver.solve(
            qpsolver.QpProblem(W=H2, f=g2, A_eq=A_lin, b_eq=b_lin, A_in=A_in, b_in=b_in), qopts
        )
        if sol.status == "infeasible":
            return np.zeros(n), 0.0, False
    duals = 0.0
    if sol.duals_eq.size:
        duals = max(duals, float(np.abs(sol.duals_eq).max()))
    if sol.duals_in.size:
        duals = max(duals, float(np.abs(sol.duals_in).max()))
    return sol.x, duals, True


def _perturbation_batch(S, U, h):
    """Rows for forward-difference sweeps: per knot, the base point followed
    by ns+nu single-coordinate perturbations."""
    N, ns = S.shape
    nu = U.shape[1]
    reps = ns + nu
    Sb = np.repeat(S, reps, axis=0)
    Ub = np.repeat(U, reps, axis=0)
    for k in range(N):
        base = k * reps
        for i in range(ns):
            Sb[base + i, i] += h
        for i in range(nu):
            Ub[base + ns + i, i] += h
    return Sb, Ub
