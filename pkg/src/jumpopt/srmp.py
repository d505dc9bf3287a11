"""Planar pendulum-with-barbell model: a telescoping massless rod (length
phi, angle theta_l from vertical) pinned to the ground, carrying a
rotating barbell (radius varphi, angle theta_pl relative to the rod) with
the robot's mass split evenly between the two barbell tips.

Closed-form mass matrix and bias vector come from the Lagrangian of the
two point masses; all functions accept scalars or equal-length arrays.
Angles follow the sagittal convention: positive rotations about +y tilt
the vertical toward +x, and angular momentum is measured about +y.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FreeFallSingularity

GRAVITY = 9.8


@dataclass
class SrmpState:
    """Configuration [theta_l, phi, theta_pl, varphi] with two derivative levels."""

    theta_l: float
    phi: float
    theta_pl: float
    varphi: float
    dtheta_l: float = 0.0
    dphi: float = 0.0
    dtheta_pl: float = 0.0
    dvarphi: float = 0.0
    ddtheta_l: float = 0.0
    ddphi: float = 0.0
    ddtheta_pl: float = 0.0
    ddvarphi: float = 0.0

    @classmethod
    def from_vector(cls, s) -> "SrmpState":
        return cls(*np.asarray(s, dtype=float))

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.theta_l, self.phi, self.theta_pl, self.varphi,
                self.dtheta_l, self.dphi, self.dtheta_pl, self.dvarphi,
                self.ddtheta_l, self.ddphi, self.ddtheta_pl, self.ddvarphi,
            ]
        )

    @property
    def config(self) -> np.ndarray:
        return np.array([self.theta_l, self.phi, self.theta_pl, self.varphi])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.dtheta_l, self.dphi, self.dtheta_pl, self.dvarphi])

    @property
    def acceleration(self) -> np.ndarray:
        return np.array([self.ddtheta_l, self.ddphi, self.ddtheta_pl, self.ddvarphi])


@dataclass
class SrmpDynamics:
    M: np.ndarray  # (4, 4)
    H: np.ndarray  # (4,)


def mass_matrix(phi, varphi, m_p: float):
    """M(theta) of the pendulum; rows/cols ordered [theta_l, phi, theta_pl, varphi]."""
    phi = np.asarray(phi, dtype=float)
    varphi = np.asarray(varphi, dtype=float)
    if np.any(phi <= 0.0) or np.any(varphi <= 0.0):
        raise DomainError("rod length and barbell radius must be positive")
    shape = np.broadcast_shapes(phi.shape, varphi.shape)
    M = np.zeros(shape + (4, 4))
    p2 = phi * phi
    v2 = varphi * varphi
    M[..., 0, 0] = p2 + v2
    M[..., 0, 2] = M[..., 2, 0] = v2
    M[..., 2, 2] = v2
    M[..., 1, 1] = 1.0
    M[..., 3, 3] = 1.0
    return 2.0 * m_p * M


def bias_vector(theta_l, phi, dtheta_l, dphi, varphi, dvarphi, dtheta_pl, m_p: float, g: float = GRAVITY):
    """Velocity-product plus gravity terms H(theta, theta_dot)."""
    theta_l = np.asarray(theta_l, dtype=float)
    beta_dot = np.asarray(dtheta_l) + np.asarray(dtheta_pl)
    barbell = 2.0 * np.asarray(varphi) * np.asarray(dvarphi) * beta_dot
    H = np.stack(
        [
            2.0 * np.asarray(phi) * np.asarray(dphi) * np.asarray(dtheta_l)
            + barbell
            - g * np.asarray(phi) * np.sin(theta_l),
            -np.asarray(phi) * np.asarray(dtheta_l) ** 2 + g * np.cos(theta_l),
            barbell,
            -np.asarray(varphi) * beta_dot**2,
        ],
        axis=-1,
    )
    return 2.0 * m_p * H


def derive_dynamics(state: SrmpState, m_p: float, g: float = GRAVITY) -> SrmpDynamics:
    """Coefficients of M(theta) qdd + H(theta, qdot) = F for one state."""
    M = mass_matrix(state.phi, state.varphi, m_p)
    H = bias_vector(
        state.theta_l, state.phi, state.dtheta_l, state.dphi,
        state.varphi, state.dvarphi, state.dtheta_pl, m_p, g,
    )
    return SrmpDynamics(M=M, H=H)


def joint_forces(state: SrmpState, m_p: float, g: float = GRAVITY) -> np.ndarray:
    """[tau_l, F_phi, tau_pl, F_varphi] realizing the state's accelerations."""
    dyn = derive_dynamics(state, m_p, g)
    return dyn.M @ state.acceleration + dyn.H


def joint_forces_arrays(th, ph, tpl, vp, dth, dph, dtpl, dvp, ddth, ddph, ddtpl, ddvp, m_p, g=GRAVITY):
    """Vectorized joint forces over component arrays; returns (..., 4)."""
    beta_dot = dth + dtpl
    beta_ddot = ddth + ddtpl
    v2 = vp * vp
    barbell = 2.0 * vp * dvp * beta_dot
    f0 = (ph * ph + v2) * ddth + v2 * ddtpl + 2.0 * ph * dph * dth + barbell - g * ph * np.sin(th)
    f1 = ddph - ph * dth * dth + g * np.cos(th)
    f2 = v2 * beta_ddot + barbell
    f3 = ddvp - vp * beta_dot * beta_dot
    return 2.0 * m_p * np.stack([f0, f1, f2, f3], axis=-1)


def total_inertia(varphi, m_p: float):
    """Barbell inertia about its center: 2 m_p varphi^2."""
    varphi = np.asarray(varphi, dtype=float)
    if np.any(varphi < 0.0):
        raise DomainError("barbell radius must be non-negative")
    return 2.0 * m_p * varphi * varphi


def cam(varphi, dtheta_l, dtheta_pl, m_p: float):
    """Pitch angular momentum about the CoM: 2 m_p varphi^2 (w_l + w_pl)."""
    return 2.0 * m_p * np.asarray(varphi) ** 2 * (np.asarray(dtheta_l) + np.asarray(dtheta_pl))


def cam_rate(varphi, dvarphi, dtheta_l, dtheta_pl, ddtheta_l, ddtheta_pl, m_p: float):
    """d/dt of the CAM: 2 m_p v^2 (dw_l + dw_pl) + 4 m_p v vdot (w_l + w_pl)."""
    vp = np.asarray(varphi)
    w = np.asarray(dtheta_l) + np.asarray(dtheta_pl)
    dw = np.asarray(ddtheta_l) + np.asarray(ddtheta_pl)
    return 2.0 * m_p * vp * vp * dw + 4.0 * m_p * vp * np.asarray(dvarphi) * w


def com_kinematics(theta_l, phi, dtheta_l=0.0, dphi=0.0, ddtheta_l=0.0, ddphi=0.0):
    """CoM (= rod tip) position, velocity and acceleration in the x-z plane.

    Returns (pos, vel, acc), each (..., 2) with columns [x, z].
    """
    th = np.asarray(theta_l, dtype=float)
    ph = np.asarray(phi, dtype=float)
    dth, dph = np.asarray(dtheta_l, dtype=float), np.asarray(dphi, dtype=float)
    ddth, ddph = np.asarray(ddtheta_l, dtype=float), np.asarray(ddphi, dtype=float)
    s, c = np.sin(th), np.cos(th)
    pos = np.stack([ph * s, ph * c], axis=-1)
    vel = np.stack([dph * s + ph * c * dth, dph * c - ph * s * dth], axis=-1)
    acc = np.stack(
        [
            ddph * s + 2.0 * dph * c * dth - ph * s * dth**2 + ph * c * ddth,
            ddph * c - 2.0 * dph * s * dth - ph * c * dth**2 - ph * s * ddth,
        ],
        axis=-1,
    )
    return pos, vel, acc


def cop_x(com_pos, com_acc, ldot, mass: float, g: float = GRAVITY, eps_free: float = 1e-6):
    """Ground contact point where the net wrench has no pitch moment.

    com_pos/com_acc are (..., 2) arrays of [x, z] components.  Raises
    :class:`FreeFallSingularity` when vertical acceleration cancels
    gravity (no defined contact point in free fall).
    """
    com_pos = np.asarray(com_pos, dtype=float)
    com_acc = np.asarray(com_acc, dtype=float)
    denom = com_acc[..., 1] + g
    if np.any(np.abs(denom) < eps_free):
        raise FreeFallSingularity(
            "vertical acceleration cancels gravity; contact point undefined"
        )
    px, pz = com_pos[..., 0], com_pos[..., 1]
    return px - (mass * pz * com_acc[..., 0] + np.asarray(ldot)) / (mass * denom)


def mass_positions(state_config, varphi=None):
    """World positions of the two barbell point masses, (..., 2, 2)."""
    th, ph, tpl, vp = (
        (state_config.theta_l, state_config.phi, state_config.theta_pl, state_config.varphi)
        if isinstance(state_config, SrmpState)
        else state_config
    )
    beta = np.asarray(th) + np.asarray(tpl)
    tip = np.stack([np.asarray(ph) * np.sin(th), np.asarray(ph) * np.cos(th)], axis=-1)
    u = np.stack([np.cos(beta), -np.sin(beta)], axis=-1)
    return np.stack([tip + np.asarray(vp)[..., None] * u, tip - np.asarray(vp)[..., None] * u], axis=-2)


def energy(state: SrmpState, m_p: float, g: float = GRAVITY) -> float:
    """Kinetic plus potential energy of the two point masses."""
    beta_dot = state.dtheta_l + state.dtheta_pl
    t = m_p * (
        state.dphi**2
        + state.phi**2 * state.dtheta_l**2
        + state.dvarphi**2
        + state.varphi**2 * beta_dot**2
    )
    v = 2.0 * m_p * g * state.phi * np.cos(state.theta_l)
    return float(t + v)


def unforced_step(state: SrmpState, dt: float, m_p: float, g: float = GRAVITY) -> SrmpState:
    """One RK4 step of the unforced pendulum (F = 0)."""

    def acc(cfg, vel):
        M = mass_matrix(cfg[1], cfg[3], m_p)
        H = bias_vector(cfg[0], cfg[1], vel[0], vel[1], cfg[3], vel[3], vel[2], m_p, g)
        return np.linalg.solve(M, -H)

    q, v = state.config, state.velocity
    k1q, k1v = v, acc(q, v)
    k2q, k2v = v + 0.5 * dt * k1v, acc(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
    k3q, k3v = v + 0.5 * dt * k2v, acc(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
    k4q, k4v = v + dt * k3v, acc(q + dt * k3q, v + dt * k3v)
    qn = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    vn = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    an = acc(qn, vn)
    return SrmpState(*qn, *vn, *an)
