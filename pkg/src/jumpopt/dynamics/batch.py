"""Batched dynamics evaluation: same recursions as ``engine``, leading
batch axis over states.  Used where many nearby states are evaluated at
once (finite-difference sweeps inside the whole-body solver); agreement
with the scalar engine is exact because the arithmetic is identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import KinematicModel

_EY = np.array([0.0, 1.0, 0.0])


def _bcross(a, b):
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def _bskew(v):
    B = v.shape[0]
    K = np.zeros((B, 3, 3))
    K[:, 0, 1] = -v[:, 2]
    K[:, 0, 2] = v[:, 1]
    K[:, 1, 0] = v[:, 2]
    K[:, 1, 2] = -v[:, 0]
    K[:, 2, 0] = -v[:, 1]
    K[:, 2, 1] = v[:, 0]
    return K


def _brot(axis, angle):
    c = np.cos(angle)[:, None, None]
    s = np.sin(angle)[:, None, None]
    K = np.zeros((3, 3))
    x, y, z = axis
    K[0, 1], K[0, 2] = -z, y
    K[1, 0], K[1, 2] = z, -x
    K[2, 0], K[2, 1] = -y, x
    return c * np.eye(3) + s * K + (1.0 - c) * np.outer(axis, axis)


@dataclass
class BatchMarker:
    position: np.ndarray      # (B, 3)
    velocity: np.ndarray
    jacobian: np.ndarray      # (B, 3, n)
    jdot_qdot: np.ndarray
    ang_velocity: np.ndarray
    ang_jacobian: np.ndarray
    ang_jdot_qdot: np.ndarray


@dataclass
class BatchEval:
    M: np.ndarray             # (B, n, n)
    H: np.ndarray             # (B, n)
    com_position: np.ndarray  # (B, 3)
    com_velocity: np.ndarray
    com_jacobian: np.ndarray  # (B, 3, n)
    com_bias: np.ndarray
    L: np.ndarray             # (B,)
    rho_R: np.ndarray
    rho_dot: np.ndarray
    rho_jacobian: np.ndarray  # (B, n)
    rho_bias: np.ndarray
    markers: dict[str, BatchMarker] = field(default_factory=dict)


def batch_evaluation(
    model: KinematicModel, Q: np.ndarray, Qd: np.ndarray, marker_names: list[str] | None = None
) -> BatchEval:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Qd = np.atleast_2d(np.asarray(Qd, dtype=float))
    B, n = Q.shape
    if Qd.shape != (B, n) or n != model.n:
        raise ValueError(f"batch shapes {Q.shape} / {Qd.shape} do not match model n={model.n}")

    R = np.empty((n, B, 3, 3))
    p = np.empty((n, B, 3))
    w = np.empty((n, B, 3))
    v = np.empty((n, B, 3))
    aw = np.empty((n, B, 3))
    av = np.empty((n, B, 3))
    axis_w = np.empty((n, B, 3))
    z3 = np.zeros((B, 3))
    for i in range(n):
        pi = model.parents[i]
        if pi < 0:
            Rp = np.broadcast_to(np.eye(3), (B, 3, 3))
            pp = wp = vp = awp = avp = z3
        else:
            Rp, pp, wp, vp, awp, avp = R[pi], p[pi], w[pi], v[pi], aw[pi], av[pi]
        ax = model.axes_local[i]
        a = Rp @ ax
        axis_w[i] = a
        qi, qdi = Q[:, i], Qd[:, i]
        if model.is_revolute[i]:
            r = Rp @ model.offsets[i]
            R[i] = Rp @ _brot(ax, qi)
            p[i] = pp + r
            w[i] = wp + a * qdi[:, None]
            v[i] = vp + _bcross(wp, r)
            aw[i] = awp + _bcross(wp, a) * qdi[:, None]
            av[i] = avp + _bcross(awp, r) + _bcross(wp, _bcross(wp, r))
        else:
            r = Rp @ model.offsets[i] + a * qi[:, None]
            R[i] = Rp
            p[i] = pp + r
            w[i] = wp
            v[i] = vp + _bcross(wp, r) + a * qdi[:, None]
            aw[i] = awp
            av[i] = (
                avp
                + _bcross(awp, r)
                + _bcross(wp, _bcross(wp, r) + 2.0 * a * qdi[:, None])
            )

    com_b = np.empty((n, B, 3))
    vcom_b = np.empty((n, B, 3))
    acom_b = np.empty((n, B, 3))
    theta = np.empty((n, B, 3, 3))
    for i in range(n):
        rc = R[i] @ model.coms_local[i]
        com_b[i] = p[i] + rc
        vcom_b[i] = v[i] + _bcross(w[i], rc)
        acom_b[i] = av[i] + _bcross(aw[i], rc) + _bcross(w[i], _bcross(w[i], rc))
        theta[i] = R[i] @ model.inertias_local[i] @ R[i].transpose(0, 2, 1)

    # Newton-Euler bias pass (zero acceleration, gravity included)
    mom = np.zeros((n, B, 3))
    frc = np.zeros((n, B, 3))
    grav = np.array([0.0, 0.0, -model.gravity])
    for i in model.massive_idx:
        f = model.masses[i] * (acom_b[i] - grav)
        nq = (theta[i] @ w[i][..., None])[..., 0]
        nq = (theta[i] @ aw[i][..., None])[..., 0] + _bcross(w[i], nq)
        mom[i] += nq + _bcross(com_b[i], f)
        frc[i] += f
    H = np.empty((B, n))
    for i in range(n - 1, -1, -1):
        pi = model.parents[i]
        if pi >= 0:
            mom[pi] += mom[i]
            frc[pi] += frc[i]
        if model.is_revolute[i]:
            H[:, i] = np.einsum(
                "bi,bi->b", axis_w[i], mom[i] - _bcross(p[i], frc[i])
            )
        else:
            H[:, i] = np.einsum("bi,bi->b", axis_w[i], frc[i])

    # composite-rigid-body mass matrix about the world origin
    IC = np.zeros((n, B, 6, 6))
    for i in model.massive_idx:
        m = model.masses[i]
        ch = _bskew(com_b[i])
        IC[i, :, :3, :3] += theta[i] + m * (ch @ ch.transpose(0, 2, 1))
        IC[i, :, :3, 3:] += m * ch
        IC[i, :, 3:, :3] += m * ch.transpose(0, 2, 1)
        IC[i, :, 3:, 3:] += m * np.eye(3)
    for i in range(n - 1, 0, -1):
        IC[model.parents[i]] += IC[i]
    S = np.zeros((n, B, 6))
    for i in range(n):
        if model.is_revolute[i]:
            S[i, :, :3] = axis_w[i]
            S[i, :, 3:] = _bcross(p[i], axis_w[i])
        else:
            S[i, :, 3:] = axis_w[i]
    M = np.zeros((B, n, n))
    F = np.empty((n, B, 6))
    for j in range(n):
        Fj = (IC[j] @ S[j][..., None])[..., 0]
        F[j] = Fj
        M[:, j, j] = np.einsum("bi,bi->b", S[j], Fj)
        k = model.parents[j]
        while k >= 0:
            M[:, j, k] = M[:, k, j] = np.einsum("bi,bi->b", S[k], Fj)
            k = model.parents[k]

    masses = model.masses[model.massive_idx]
    total = model.total_mass
    com = np.einsum("m,mbi->bi", masses, com_b[model.massive_idx]) / total
    vcom = np.einsum("m,mbi->bi", masses, vcom_b[model.massive_idx]) / total
    bcom = np.einsum("m,mbi->bi", masses, acom_b[model.massive_idx]) / total

    # pitch CAM from per-DOF composite forces transferred to the CoM
    k_lin = F[:, :, 3:]
    Ly_col = F[:, :, 1] - (com[None, :, 2] * k_lin[:, :, 0] - com[None, :, 0] * k_lin[:, :, 2])
    L = np.einsum("nb,bn->b", Ly_col, Qd)

    def point_jac(body, pts):
        diff = pts[None, :, :] - p
        cols = np.where(
            model.is_revolute[:, None, None], _bcross(axis_w, diff), axis_w
        )
        cols = np.where(model.ancestor_mask[body][:, None, None], cols, 0.0)
        return cols.transpose(1, 2, 0)

    def ang_jac(body):
        mask = (model.ancestor_mask[body] & model.is_revolute)[:, None, None]
        return np.where(mask, axis_w, 0.0).transpose(1, 2, 0)

    Ac = np.zeros((B, 3, n))
    Jci = {}
    for i in model.massive_idx:
        Ji = point_jac(i, com_b[i])
        Jci[i] = Ji
        Ac += model.masses[i] * Ji
    Ac /= total

    rho = np.zeros(B)
    Jrho = np.zeros((B, n))
    rho_bias = np.zeros(B)
    for i in model.massive_idx:
        m = model.masses[i]
        th = theta[i]
        d = com_b[i] - com
        rho += th[:, 1, 1] + m * (d[:, 0] ** 2 + d[:, 2] ** 2)
        th_ey = th @ _EY
        Jw = ang_jac(i)
        d_perp = d.copy()
        d_perp[:, 1] = 0.0
        Jrho += 2.0 * _bcross(Jw.transpose(0, 2, 1), th_ey[:, None, :])[:, :, 1]
        Jrho += 2.0 * m * np.einsum("bi,bin->bn", d_perp, Jci[i] - Ac)
        wd = w[i]
        thdot = _bskew(wd) @ th - th @ _bskew(wd)
        dd = vcom_b[i] - vcom
        ddd = acom_b[i] - bcom
        rho_bias += 2.0 * _bcross(aw[i], th_ey)[:, 1]
        rho_bias += 2.0 * _bcross(wd, (thdot @ _EY))[:, 1]
        rho_bias += 2.0 * m * (dd[:, 0] ** 2 + dd[:, 2] ** 2 + d[:, 0] * ddd[:, 0] + d[:, 2] * ddd[:, 2])
    rho_dot = np.einsum("bn,bn->b", Jrho, Qd)

    markers = {}
    for name in marker_names if marker_names is not None else []:
        body, offset = model.markers[name]
        r = R[body] @ offset
        pos = p[body] + r
        wb = w[body]
        markers[name] = BatchMarker(
            position=pos,
            velocity=v[body] + _bcross(wb, r),
            jacobian=point_jac(body, pos),
            jdot_qdot=av[body] + _bcross(aw[body], r) + _bcross(wb, _bcross(wb, r)),
            ang_velocity=wb,
            ang_jacobian=ang_jac(body),
            ang_jdot_qdot=aw[body],
        )

    return BatchEval(
        M=M,
        H=H,
        com_position=com,
        com_velocity=vcom,
        com_jacobian=Ac,
        com_bias=bcom,
        L=L,
        rho_R=rho,
        rho_dot=rho_dot,
        rho_jacobian=Jrho,
        rho_bias=rho_bias,
        markers=markers,
    )
