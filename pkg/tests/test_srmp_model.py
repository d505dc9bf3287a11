"""Pendulum-model oracles.

The reference path rebuilds the Lagrangian from the raw geometry (two
point masses on the barbell) using complex-step jacobians, then evaluates
the Euler-Lagrange equations by finite differences; the closed-form
dynamics must match.
"""
import numpy as np
import pytest

from jumpopt.errors import DomainError, FreeFallSingularity
from jumpopt.srmp import (
    SrmpState,
    cam,
    cam_rate,
    com_kinematics,
    cop_x,
    derive_dynamics,
    energy,
    joint_forces,
    joint_forces_arrays,
    mass_matrix,
    total_inertia,
    unforced_step,
)

M_P = 21.0
G = 9.8


def _mass_positions(cfg):
    """Geometry only: the two point masses in the x-z plane (oracle-local)."""
    th, ph, tpl, vp = cfg[0], cfg[1], cfg[2], cfg[3]
    beta = th + tpl
    tip = np.array([ph * np.sin(th), ph * np.cos(th)])
    u = np.array([np.cos(beta), -np.sin(beta)])
    return tip + vp * u, tip - vp * u


def _geometry_jacobians(cfg):
    """d(position)/d(config) for both masses via complex step (exact)."""
    h = 1e-30
    jacs = [np.zeros((2, 4)), np.zeros((2, 4))]
    for j in range(4):
        c = np.asarray(cfg, dtype=complex)
        c[j] += 1j * h
        for m, pos in enumerate(_mass_positions(c)):
            jacs[m][:, j] = np.imag(pos) / h
    return jacs


def _lagrangian(cfg, vel):
    j1, j2 = _geometry_jacobians(cfg)
    v1, v2 = j1 @ vel, j2 @ vel
    t = 0.5 * M_P * (v1 @ v1 + v2 @ v2)
    p1, p2 = _mass_positions(cfg)
    v = M_P * G * (p1[1] + p2[1])
    return t - v


def _euler_lagrange_fd(state: SrmpState):
    """d/dt dL/dqdot - dL/dq by central differences along the motion.

    dL/dqdot is exact (the Lagrangian is quadratic in the velocities), so
    the outer time difference is a single FD level and stays accurate.
    """
    cfg, vel, acc = state.config, state.velocity, state.acceleration
    h = 1e-6

    def dl_dvel(c, v):
        j1, j2 = _geometry_jacobians(c)
        return M_P * (j1.T @ (j1 @ v) + j2.T @ (j2 @ v))

    dpdt = (dl_dvel(cfg + h * vel, vel + h * acc) - dl_dvel(cfg - h * vel, vel - h * acc)) / (2 * h)
    dl_dq = np.zeros(4)
    for i in range(4):
        e = np.eye(4)[i]
        dl_dq[i] = (_lagrangian(cfg + h * e, vel) - _lagrangian(cfg - h * e, vel)) / (2 * h)
    return dpdt - dl_dq


def random_state(rng, with_acc=True):
    return SrmpState(
        theta_l=rng.uniform(-0.5, 0.5),
        phi=rng.uniform(0.4, 1.0),
        theta_pl=rng.uniform(-1.0, 1.0),
        varphi=rng.uniform(0.1, 0.5),
        dtheta_l=rng.uniform(-3, 3),
        dphi=rng.uniform(-2, 2),
        dtheta_pl=rng.uniform(-4, 4),
        dvarphi=rng.uniform(-1, 1),
        ddtheta_l=rng.uniform(-20, 20) if with_acc else 0.0,
        ddphi=rng.uniform(-20, 20) if with_acc else 0.0,
        ddtheta_pl=rng.uniform(-20, 20) if with_acc else 0.0,
        ddvarphi=rng.uniform(-20, 20) if with_acc else 0.0,
    )


def test_forces_match_finite_difference_euler_lagrange():
    rng = np.random.default_rng(11)
    for _ in range(100):
        state = random_state(rng)
        want = _euler_lagrange_fd(state)
        got = joint_forces(state, M_P)
        assert np.abs(got - want).max() < 1e-6


def test_vectorized_forces_match_scalar():
    rng = np.random.default_rng(12)
    states = [random_state(rng) for _ in range(8)]
    mats = np.stack([s.as_vector() for s in states])
    batch = joint_forces_arrays(*[mats[:, i] for i in range(12)], M_P)
    for k, s in enumerate(states):
        assert np.abs(batch[k] - joint_forces(s, M_P)).max() < 1e-12


def test_balanced_upright_has_no_rotational_gravity_bias():
    state = SrmpState(theta_l=0.0, phi=0.7, theta_pl=0.0, varphi=0.25)
    dyn = derive_dynamics(state, M_P)
    assert dyn.H[0] == pytest.approx(0.0, abs=1e-14)   # rod torque balanced
    assert dyn.H[2] == pytest.approx(0.0, abs=1e-14)   # barbell torque balanced
    assert dyn.H[1] == pytest.approx(2 * M_P * G, abs=1e-12)


def test_mass_matrix_positive_definite():
    rng = np.random.default_rng(13)
    for _ in range(50):
        s = random_state(rng)
        M = mass_matrix(s.phi, s.varphi, M_P)
        assert np.abs(M - M.T).max() == 0.0
        assert np.linalg.eigvalsh(M).min() > 0.0


def test_nonpositive_lengths_raise():
    with pytest.raises(DomainError):
        mass_matrix(0.0, 0.2, M_P)
    with pytest.raises(DomainError):
        mass_matrix(0.7, -0.1, M_P)


def test_unforced_energy_conservation():
    rng = np.random.default_rng(14)
    state = random_state(rng, with_acc=False)
    e0 = energy(state, M_P)
    for _ in range(5000):
        state = unforced_step(state, 1e-4, M_P)
    assert abs(energy(state, M_P) - e0) / abs(e0) < 1e-5


# ---------------------------------------------------------------- inertia/CAM

def test_total_inertia_reference_value():
    assert total_inertia(0.2, 21.0) == pytest.approx(1.68, abs=1e-12)


def test_total_inertia_limits_and_scaling():
    assert total_inertia(0.0, 21.0) == 0.0
    assert total_inertia(0.4, 21.0) == pytest.approx(4.0 * total_inertia(0.2, 21.0))


def test_cam_values():
    assert cam(0.3, 0.0, 0.0, M_P) == 0.0
    assert cam(0.3, 1.7, -1.7, M_P) == pytest.approx(0.0, abs=1e-14)
    assert cam(0.2, 0.4, 0.6, M_P) == pytest.approx(1.68, abs=1e-12)


def test_cam_rate_matches_finite_difference():
    rng = np.random.default_rng(15)
    h = 1e-6
    for _ in range(20):
        s = random_state(rng)
        fwd = cam(s.varphi + h * s.dvarphi, s.dtheta_l + h * s.ddtheta_l, s.dtheta_pl + h * s.ddtheta_pl, M_P)
        bwd = cam(s.varphi - h * s.dvarphi, s.dtheta_l - h * s.ddtheta_l, s.dtheta_pl - h * s.ddtheta_pl, M_P)
        want = (fwd - bwd) / (2 * h)
        got = cam_rate(s.varphi, s.dvarphi, s.dtheta_l, s.dtheta_pl, s.ddtheta_l, s.ddtheta_pl, M_P)
        assert abs(got - want) < 1e-6


# ----------------------------------------------------------------------- CoP

def test_cop_static_stance_is_under_com():
    pos = np.array([0.13, 0.8])
    x = cop_x(pos, np.zeros(2), 0.0, 42.0)
    assert x == pytest.approx(0.13, abs=0.0)


def test_cop_shifts_backward_with_positive_cam_rate():
    pos = np.array([0.0, 0.8])
    ldot = 3.0
    x = cop_x(pos, np.zeros(2), ldot, 42.0)
    assert x == pytest.approx(-ldot / (42.0 * G), abs=1e-14)


def test_cop_free_fall_singularity():
    with pytest.raises(FreeFallSingularity):
        cop_x(np.array([0.0, 0.8]), np.array([0.0, -G]), 0.0, 42.0)


def test_cop_translation_consistency():
    rng = np.random.default_rng(16)
    for _ in range(20):
        pos = rng.uniform([-0.3, 0.5], [0.3, 1.0])
        acc = rng.uniform([-5, -5], [5, 5])
        ldot = rng.uniform(-10, 10)
        d = rng.uniform(-1, 1)
        a = cop_x(pos, acc, ldot, 42.0)
        b = cop_x(pos + np.array([d, 0.0]), acc, ldot, 42.0)
        assert b - a == pytest.approx(d, abs=1e-12)


def test_com_kinematics_match_finite_difference():
    rng = np.random.default_rng(17)
    h = 1e-6
    for _ in range(20):
        s = random_state(rng)
        pos, vel, acc = com_kinematics(s.theta_l, s.phi, s.dtheta_l, s.dphi, s.ddtheta_l, s.ddphi)
        pf, vf, _ = com_kinematics(
            s.theta_l + h * s.dtheta_l, s.phi + h * s.dphi,
            s.dtheta_l + h * s.ddtheta_l, s.dphi + h * s.ddphi,
        )
        pb, vb, _ = com_kinematics(
            s.theta_l - h * s.dtheta_l, s.phi - h * s.dphi,
            s.dtheta_l - h * s.ddtheta_l, s.dphi - h * s.ddphi,
        )
        assert np.abs((pf - pb) / (2 * h) - vel).max() < 1e-6
        assert np.abs((vf - vb) / (2 * h) - acc).max() < 1e-6
