"""Floating-base rigid-body dynamics.

All quantities are expressed in the world frame (z up, gravity -z).  The
mass matrix comes from a composite-rigid-body recursion over spatial
inertias referred to the world origin; bias forces come from a recursive
Newton-Euler pass.  Every velocity-product term (marker jdot*qd, CoM
bias, inertia-rate bias) is taken from the exact zero-acceleration pass,
never from finite differences.

np.cross is avoided in per-body loops: its overhead dominates runtime at
these matrix sizes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import KinematicModel

_EY = np.array([0.0, 1.0, 0.0])


def _cross(a, b):
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = axis
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return c * np.eye(3) + s * K + (1.0 - c) * np.outer(axis, axis)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


class _Kin:
    """Forward pass: frame poses, classical velocities and accelerations.

    With qdd=None the acceleration slots hold the zero-acceleration
    (velocity-product) terms.
    """

    __slots__ = ("R", "p", "w", "v", "aw", "av", "axis_w", "com", "vcom", "acom", "theta")

    def __init__(self, model: KinematicModel, q, qd, qdd=None):
        n = model.n
        R = np.empty((n, 3, 3))
        p = np.empty((n, 3))
        w = np.empty((n, 3))
        v = np.empty((n, 3))
        aw = np.empty((n, 3))
        av = np.empty((n, 3))
        axis_w = np.empty((n, 3))
        parents = model.parents
        is_rev = model.is_revolute
        axes = model.axes_local
        offsets = model.offsets
        zero3 = np.zeros(3)
        eye3 = np.eye(3)
        for i in range(n):
            pi = parents[i]
            if pi < 0:
                Rp, pp = eye3, zero3
                wp = vp = awp = avp = zero3
            else:
                Rp, pp, wp, vp, awp, avp = R[pi], p[pi], w[pi], v[pi], aw[pi], av[pi]
            a = Rp @ axes[i]
            axis_w[i] = a
            qdd_i = 0.0 if qdd is None else qdd[i]
            if is_rev[i]:
                r = Rp @ offsets[i]
                R[i] = Rp @ _rot(axes[i], q[i])
                p[i] = pp + r
                w[i] = wp + a * qd[i]
                v[i] = vp + _cross(wp, r)
                aw[i] = awp + _cross(wp, a) * qd[i] + a * qdd_i
                av[i] = avp + _cross(awp, r) + _cross(wp, _cross(wp, r))
            else:
                r = Rp @ (offsets[i] + axes[i] * q[i])
                R[i] = Rp
                p[i] = pp + r
                w[i] = wp
                v[i] = vp + _cross(wp, r) + a * qd[i]
                av[i] = (
                    avp
                    + _cross(awp, r)
                    + _cross(wp, _cross(wp, r) + 2.0 * (a * qd[i]))
                    + a * qdd_i
                )
                aw[i] = awp
        self.R, self.p, self.w, self.v, self.aw, self.av, self.axis_w = R, p, w, v, aw, av, axis_w

        # per-body CoM kinematics and world-frame rotational inertia
        rc = np.einsum("nij,nj->ni", R, model.coms_local)
        self.com = p + rc
        self.vcom = v + np.cross(w, rc)
        self.acom = av + np.cross(aw, rc) + np.cross(w, np.cross(w, rc))
        self.theta = np.einsum("nij,njk,nlk->nil", R, model.inertias_local, R)


def _point_jacobian(model: KinematicModel, kin: _Kin, body: int, point: np.ndarray) -> np.ndarray:
    mask = model.ancestor_mask[body]
    cols = np.where(
        model.is_revolute[:, None], np.cross(kin.axis_w, point - kin.p), kin.axis_w
    )
    cols = np.where(mask[:, None], cols, 0.0)
    return cols.T


def _angular_jacobian(model: KinematicModel, kin: _Kin, body: int) -> np.ndarray:
    mask = model.ancestor_mask[body] & model.is_revolute
    cols = np.where(mask[:, None], kin.axis_w, 0.0)
    return cols.T


def inverse_dynamics(model: KinematicModel, q, qd, qdd) -> np.ndarray:
    """Generalized forces tau with M*qdd + H = tau (gravity included)."""
    q, qd, qdd = _check(model, q, qd, qdd)
    kin = _Kin(model, q, qd, qdd)
    return _rnea_from_kin(model, kin)


def _rnea_from_kin(model: KinematicModel, kin: _Kin) -> np.ndarray:
    n = model.n
    gz = -model.gravity
    mom = np.zeros((n, 3))   # subtree moment about world origin
    frc = np.zeros((n, 3))
    for i in model.massive_idx:
        f = model.masses[i] * kin.acom[i]
        f[2] -= model.masses[i] * gz
        wi = kin.w[i]
        th = kin.theta[i]
        nq = th @ kin.aw[i] + _cross(wi, th @ wi)
        mom[i] += nq + _cross(kin.com[i], f)
        frc[i] += f
    tau = np.empty(n)
    parents = model.parents
    for i in range(n - 1, -1, -1):
        pi = parents[i]
        if pi >= 0:
            mom[pi] += mom[i]
            frc[pi] += frc[i]
        a = kin.axis_w[i]
        if model.is_revolute[i]:
            tau[i] = a @ (mom[i] - _cross(kin.p[i], frc[i]))
        else:
            tau[i] = a @ frc[i]
    return tau


def _crba_from_kin(model: KinematicModel, kin: _Kin):
    """Mass matrix and per-DOF composite spatial forces about the origin."""
    n = model.n
    IC = np.zeros((n, 6, 6))
    eye3 = np.eye(3)
    for i in model.massive_idx:
        m = model.masses[i]
        ch = _skew(kin.com[i])
        IO = IC[i]
        IO[:3, :3] += kin.theta[i] + m * (ch @ ch.T)
        IO[:3, 3:] += m * ch
        IO[3:, :3] += m * ch.T
        IO[3:, 3:] += m * eye3
    parents = model.parents
    for i in range(n - 1, 0, -1):
        IC[parents[i]] += IC[i]

    S = np.empty((n, 6))
    for i in range(n):
        a = kin.axis_w[i]
        if model.is_revolute[i]:
            S[i, :3] = a
            S[i, 3:] = _cross(kin.p[i], a)
        else:
            S[i, :3] = 0.0
            S[i, 3:] = a
    M = np.zeros((n, n))
    F = np.empty((n, 6))
    for j in range(n):
        Fj = IC[j] @ S[j]
        F[j] = Fj
        M[j, j] = S[j] @ Fj
        k = parents[j]
        while k >= 0:
            M[j, k] = M[k, j] = S[k] @ Fj
            k = parents[k]
    return M, F


@dataclass
class MarkerKinematics:
    position: np.ndarray
    velocity: np.ndarray
    jacobian: np.ndarray          # (3, n) linear point jacobian
    jdot_qdot: np.ndarray         # marker acceleration at qdd = 0
    ang_velocity: np.ndarray
    ang_jacobian: np.ndarray      # (3, n)
    ang_jdot_qdot: np.ndarray


@dataclass
class DynamicsEvaluation:
    """Everything the solvers need at one (q, qd)."""

    M: np.ndarray
    H: np.ndarray
    com_position: np.ndarray
    com_velocity: np.ndarray
    com_jacobian: np.ndarray      # A_c, (3, n)
    com_bias: np.ndarray          # B_c = CoM acceleration at qdd = 0
    cmm: np.ndarray               # (6, n), rows [angular; linear] about the CoM
    rho_R: float                  # composite pitch inertia about the CoM
    rho_jacobian: np.ndarray      # J_rho, (n,): rho_dot = J_rho qd
    rho_bias: float               # rho_ddot at qdd = 0
    L: float                      # pitch centroidal angular momentum
    markers: dict[str, MarkerKinematics] = field(default_factory=dict)


def full_evaluation(
    model: KinematicModel, q, qd, marker_names: list[str] | None = None
) -> DynamicsEvaluation:
    """One shared pass computing dynamics, centroidal and marker data."""
    q, qd = _check(model, q, qd)
    kin = _Kin(model, q, qd, None)
    H = _rnea_from_kin(model, kin)
    M, F = _crba_from_kin(model, kin)

    masses = model.masses[model.massive_idx]
    total = model.total_mass
    com = masses @ kin.com[model.massive_idx] / total
    vcom = masses @ kin.vcom[model.massive_idx] / total
    bcom = masses @ kin.acom[model.massive_idx] / total

    # centroidal momentum matrix: transfer per-DOF composite forces to the CoM
    cmm = np.empty((6, model.n))
    cmm[3:, :] = F[:, 3:].T
    cmm[:3, :] = F[:, :3].T - np.cross(com[None, :], F[:, 3:]).T

    Ac = np.zeros((3, model.n))
    Jci = {}
    for i in model.massive_idx:
        Ji = _point_jacobian(model, kin, i, kin.com[i])
        Jci[i] = Ji
        Ac += model.masses[i] * Ji
    Ac /= total

    rho, Jrho, rho_bias = _rho_terms(model, kin, com, vcom, bcom, Ac, Jci)
    L = float(cmm[1] @ qd)

    markers = {}
    for name in marker_names if marker_names is not None else model.marker_names():
        markers[name] = _marker(model, kin, name)

    return DynamicsEvaluation(
        M=M,
        H=H,
        com_position=com,
        com_velocity=vcom,
        com_jacobian=Ac,
        com_bias=bcom,
        cmm=cmm,
        rho_R=rho,
        rho_jacobian=Jrho,
        rho_bias=rho_bias,
        L=L,
        markers=markers,
    )


def _rho_terms(model, kin, com, vcom, bcom, Ac, Jci):
    """Pitch composite inertia about the CoM, its jacobian row and rate bias.

    rho = sum_i [Theta_i,yy + m_i (d_x^2 + d_z^2)],  d_i = com_i - com.
    The jacobian and the zero-acceleration second rate follow by direct
    differentiation (rotational parts through skew(w)*Theta).
    """
    rho = 0.0
    Jrho = np.zeros(model.n)
    bias = 0.0
    for i in model.massive_idx:
        m = model.masses[i]
        th = kin.theta[i]
        d = kin.com[i] - com
        rho += th[1, 1] + m * (d[0] * d[0] + d[2] * d[2])

        th_ey = th @ _EY
        Jw = _angular_jacobian(model, kin, i)
        d_perp = np.array([d[0], 0.0, d[2]])
        Jrho += 2.0 * (np.cross(Jw.T, th_ey)[:, 1]) + 2.0 * m * (d_perp @ (Jci[i] - Ac))

        wd = kin.w[i]
        thdot = _skew(wd) @ th - th @ _skew(wd)
        dd = kin.vcom[i] - vcom
        ddd = kin.acom[i] - bcom
        bias += 2.0 * _cross(kin.aw[i], th_ey)[1]
        bias += 2.0 * _cross(wd, thdot @ _EY)[1]
        bias += 2.0 * m * (dd[0] * dd[0] + dd[2] * dd[2] + d[0] * ddd[0] + d[2] * ddd[2])
    return float(rho), Jrho, float(bias)


def _marker(model: KinematicModel, kin: _Kin, name: str) -> MarkerKinematics:
    if name not in model.markers:
        raise ValueError(f"unknown marker '{name}'; model has {model.marker_names()}")
    body, offset = model.markers[name]
    r = kin.R[body] @ offset
    pos = kin.p[body] + r
    w = kin.w[body]
    vel = kin.v[body] + _cross(w, r)
    acc0 = kin.av[body] + _cross(kin.aw[body], r) + _cross(w, _cross(w, r))
    return MarkerKinematics(
        position=pos,
        velocity=vel,
        jacobian=_point_jacobian(model, kin, body, pos),
        jdot_qdot=acc0,
        ang_velocity=w.copy(),
        ang_jacobian=_angular_jacobian(model, kin, body),
        ang_jdot_qdot=kin.aw[body].copy(),
    )


def evaluate_dynamics(model: KinematicModel, q, qd) -> DynamicsEvaluation:
    """Mass matrix, bias forces and centroidal quantities at (q, qd)."""
    return full_evaluation(model, q, qd)


def marker_kinematics(model: KinematicModel, q, qd, marker_names: list[str]) -> dict[str, MarkerKinematics]:
    """Position, velocity, jacobian and jdot*qd for the named markers."""
    q, qd = _check(model, q, qd)
    kin = _Kin(model, q, qd, None)
    return {name: _marker(model, kin, name) for name in marker_names}


def centroidal_quantities(model: KinematicModel, q, qd) -> dict:
    """CoM kinematics, pitch CAM, composite pitch inertia and its jacobian row."""
    ev = full_evaluation(model, q, qd, marker_names=[])
    return {
        "com_position": ev.com_position,
        "com_velocity": ev.com_velocity,
        "com_jacobian": ev.com_jacobian,
        "com_bias": ev.com_bias,
        "L": ev.L,
        "rho_R": ev.rho_R,
        "rho_jacobian": ev.rho_jacobian,
        "rho_bias": ev.rho_bias,
    }


def kinetic_energy(model: KinematicModel, q, qd) -> float:
    q, qd = _check(model, q, qd)
    kin = _Kin(model, q, qd, None)
    t = 0.0
    for i in model.massive_idx:
        t += model.masses[i] * (kin.vcom[i] @ kin.vcom[i])
        t += kin.w[i] @ (kin.theta[i] @ kin.w[i])
    return 0.5 * float(t)


def potential_energy(model: KinematicModel, q) -> float:
    q = np.asarray(q, dtype=float)
    kin = _Kin(model, q, np.zeros(model.n), None)
    return float(model.gravity * (model.masses[model.massive_idx] @ kin.com[model.massive_idx, 2]))


def total_energy(model: KinematicModel, q, qd) -> float:
    return kinetic_energy(model, q, qd) + potential_energy(model, q)


def forward_dynamics(model: KinematicModel, q, qd, tau=None) -> np.ndarray:
    """qdd = M^-1 (tau - H); tau defaults to zero (unforced)."""
    q, qd = _check(model, q, qd)
    kin = _Kin(model, q, qd, None)
    H = _rnea_from_kin(model, kin)
    M, _ = _crba_from_kin(model, kin)
    rhs = -H if tau is None else np.asarray(tau, dtype=float) - H
    return np.linalg.solve(M, rhs)


def rk4_step(model: KinematicModel, q, qd, dt: float, tau=None):
    """One fixed-step RK4 update of the unconstrained dynamics."""

    def f(qq, vv):
        return vv, forward_dynamics(model, qq, vv, tau)

    k1q, k1v = f(q, qd)
    k2q, k2v = f(q + 0.5 * dt * k1q, qd + 0.5 * dt * k1v)
    k3q, k3v = f(q + 0.5 * dt * k2q, qd + 0.5 * dt * k2v)
    k4q, k4v = f(q + dt * k3q, qd + dt * k3v)
    qn = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    vn = qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return qn, vn


def _check(model: KinematicModel, *vecs):
    out = []
    for v in vecs:
        arr = np.asarray(v, dtype=float)
        if arr.shape != (model.n,):
            raise ValueError(f"expected vector of length {model.n}, got shape {arr.shape}")
        out.append(arr)
    return tuple(out) if len(out) > 1 else out[0]
