"""Dynamics engine oracles: unit-RNEA columns, energy Hessian, finite
differences for every jacobian/bias term, and unforced energy conservation.
"""
import numpy as np
import pytest

from jumpopt.errors import ConfigurationError
from jumpopt.params import load_robot_params, parse_robot_params
from jumpopt.dynamics import (
    build_model,
    evaluate_dynamics,
    full_evaluation,
    inverse_dynamics,
    kinetic_energy,
    marker_kinematics,
    centroidal_quantities,
    rk4_step,
    total_energy,
)
from jumpopt.dynamics.model import Body, KinematicModel
from jumpopt.dynamics.batch import batch_evaluation


@pytest.fixture(scope="module")
def params():
    return load_robot_params()


@pytest.fixture(scope="module")
def full(params):
    return build_model(params, "full_20dof")


@pytest.fixture(scope="module")
def lite(params):
    return build_model(params, "symmetric_5link")


def random_state(model, rng, vel_scale=1.0):
    q = rng.uniform(model.q_min, model.q_max)
    qd = vel_scale * rng.standard_normal(model.n)
    return q, qd


# ---------------------------------------------------------------- build_model

def test_total_mass_is_42kg(full, lite):
    assert full.total_mass == pytest.approx(42.0, abs=1e-12)
    assert lite.total_mass == pytest.approx(42.0, abs=1e-12)


def test_full_model_has_20_coordinates(full):
    assert full.n == 20
    assert full.base_dofs == ["x", "y", "z", "roll", "pitch", "yaw"]


def test_symmetric_model_base_is_planar(lite):
    assert lite.base_dofs == ["x", "z", "pitch"]
    assert lite.n == 7


def test_aggregated_thigh_mass_doubles(params, lite):
    thigh = next(b for b in lite.bodies if b.link_name == "thigh")
    assert thigh.mass == pytest.approx(2.0 * params.links["r_thigh"].mass)
    assert np.allclose(
        thigh.inertia, params.links["r_thigh"].inertia + params.links["l_thigh"].inertia
    )


def test_missing_parameter_raises_configuration_error(params):
    import json
    from importlib import resources

    raw = json.loads(resources.files("jumpopt.data").joinpath("default_robot.json").read_text())
    raw["links"]["r_thigh"]["mass"] = -1.0
    with pytest.raises(ConfigurationError, match="r_thigh.mass"):
        parse_robot_params(raw)
    raw["links"]["r_thigh"].pop("mass")
    with pytest.raises(ConfigurationError, match="r_thigh.mass"):
        parse_robot_params(raw)


# ---------------------------------------------------------- evaluate_dynamics

def test_gravity_only_bias_at_rest(full, lite):
    for model in (full, lite):
        ev = evaluate_dynamics(model, np.zeros(model.n), np.zeros(model.n))
        iz = model.index("base_z")
        assert ev.H[iz] == pytest.approx(model.total_mass * model.gravity, abs=1e-9)
        ix = model.index("base_x")
        assert ev.H[ix] == pytest.approx(0.0, abs=1e-9)


def test_dimension_mismatch_raises(full):
    with pytest.raises(ValueError):
        evaluate_dynamics(full, np.zeros(3), np.zeros(3))


def test_mass_matrix_matches_unit_rnea(full, lite):
    rng = np.random.default_rng(1)
    for model in (full, lite):
        for _ in range(5):
            q, qd = random_state(model, rng)
            ev = evaluate_dynamics(model, q, qd)
            H = inverse_dynamics(model, q, qd, np.zeros(model.n))
            for i in range(model.n):
                col = inverse_dynamics(model, q, qd, np.eye(model.n)[i]) - H
                assert np.abs(ev.M[:, i] - col).max() < 1e-10


def test_mass_matrix_matches_energy_hessian(full):
    rng = np.random.default_rng(2)
    q, qd = random_state(full, rng)
    ev = evaluate_dynamics(full, q, qd)
    n = full.n
    h = 1e-3  # kinetic energy is quadratic in qd: no truncation error, larger h cuts roundoff
    Mfd = np.zeros((n, n))
    for i in range(n):
        ei = np.eye(n)[i]
        for j in range(i, n):
            ej = np.eye(n)[j]
            Mfd[i, j] = Mfd[j, i] = (
                kinetic_energy(full, q, qd + h * ei + h * ej)
                - kinetic_energy(full, q, qd + h * ei - h * ej)
                - kinetic_energy(full, q, qd - h * ei + h * ej)
                + kinetic_energy(full, q, qd - h * ei - h * ej)
            ) / (4.0 * h * h)
    assert np.abs(Mfd - ev.M).max() < 1e-6


def test_mass_matrix_symmetric_positive_definite_on_100_states(full):
    rng = np.random.default_rng(3)
    for _ in range(100):
        q, qd = random_state(full, rng)
        ev = evaluate_dynamics(full, q, qd)
        assert np.abs(ev.M - ev.M.T).max() < 1e-12
        x = rng.standard_normal(full.n)
        assert x @ ev.M @ x > 0.0


def test_cmm_linear_rows_give_linear_momentum(full):
    rng = np.random.default_rng(4)
    for _ in range(20):
        q, qd = random_state(full, rng)
        ev = evaluate_dynamics(full, q, qd)
        lin = ev.cmm[3:] @ qd
        assert np.abs(lin - full.total_mass * ev.com_velocity).max() < 1e-10


# --------------------------------------------------------- marker_kinematics

def test_zero_velocity_markers_are_static(full):
    rng = np.random.default_rng(5)
    q = rng.uniform(full.q_min, full.q_max)
    mk = marker_kinematics(full, q, np.zeros(full.n), full.marker_names())
    for m in mk.values():
        assert np.abs(m.velocity).max() == 0.0
        assert np.abs(m.jdot_qdot).max() == 0.0


def test_marker_jacobian_matches_finite_difference(full):
    rng = np.random.default_rng(6)
    h = 1e-6
    for _ in range(100):
        q, qd = random_state(full, rng)
        mk = marker_kinematics(full, q, qd, ["r_tiptoe", "l_heel"])
        fwd = marker_kinematics(full, q + h * qd, qd, ["r_tiptoe", "l_heel"])
        bwd = marker_kinematics(full, q - h * qd, qd, ["r_tiptoe", "l_heel"])
        for name in ("r_tiptoe", "l_heel"):
            fd_vel = (fwd[name].position - bwd[name].position) / (2 * h)
            assert np.abs(mk[name].jacobian @ qd - fd_vel).max() < 1e-6
            assert np.abs(mk[name].velocity - mk[name].jacobian @ qd).max() < 1e-12
            fd_acc = (fwd[name].velocity - bwd[name].velocity) / (2 * h)
            assert np.abs(mk[name].jdot_qdot - fd_acc).max() < 1e-5


def test_unknown_marker_raises(full):
    with pytest.raises(ValueError, match="unknown marker"):
        marker_kinematics(full, np.zeros(full.n), np.zeros(full.n), ["nose"])


# ----------------------------------------------------- centroidal_quantities

def test_cam_zero_at_rest(full):
    rng = np.random.default_rng(7)
    q = rng.uniform(full.q_min, full.q_max)
    c = centroidal_quantities(full, q, np.zeros(full.n))
    assert c["L"] == 0.0


def test_single_link_rho_is_own_inertia():
    inertia = np.diag([0.3, 0.7, 0.4])
    body = Body(
        name="base_pitch",
        parent=-1,
        joint_type="revolute",
        axis=np.array([0.0, 1.0, 0.0]),
        offset=np.zeros(3),
        mass=5.0,
        com=np.array([0.1, 0.0, 0.2]),
        inertia=inertia,
    )
    model = KinematicModel("degenerate", [body], {}, ["pitch"], 9.8, np.array([-1.0]), np.array([1.0]))
    c = centroidal_quantities(model, np.array([0.3]), np.array([0.5]))
    assert c["rho_R"] == pytest.approx(inertia[1, 1], abs=1e-14)


def test_rho_jacobian_matches_finite_difference(full, lite):
    rng = np.random.default_rng(8)
    h = 1e-6
    for model in (full, lite):
        for _ in range(50):
            q, qd = random_state(model, rng)
            c = centroidal_quantities(model, q, qd)
            cp = centroidal_quantities(model, q + h * qd, qd)
            cm = centroidal_quantities(model, q - h * qd, qd)
            fd = (cp["rho_R"] - cm["rho_R"]) / (2 * h)
            assert abs(c["rho_jacobian"] @ qd - fd) < 1e-5
            fd_bias = (cp["rho_jacobian"] @ qd - cm["rho_jacobian"] @ qd) / (2 * h)
            assert abs(c["rho_bias"] - fd_bias) < 1e-5


# ------------------------------------------------------------- conservation

def test_unforced_energy_conservation(lite):
    rng = np.random.default_rng(9)
    q = rng.uniform(lite.q_min, lite.q_max)
    qd = 0.5 * rng.standard_normal(lite.n)
    e0 = total_energy(lite, q, qd)
    for _ in range(2000):
        q, qd = rk4_step(lite, q, qd, 1e-4)
    e1 = total_energy(lite, q, qd)
    assert abs(e1 - e0) / abs(e0) < 1e-4


# ------------------------------------------------------------------ batching

def test_batch_evaluation_matches_scalar(full, lite):
    rng = np.random.default_rng(10)
    for model in (full, lite):
        B = 16
        Q = rng.uniform(model.q_min, model.q_max, size=(B, model.n))
        Qd = rng.standard_normal((B, model.n))
        names = model.marker_names()
        be = batch_evaluation(model, Q, Qd, names)
        for b in range(B):
            ev = full_evaluation(model, Q[b], Qd[b])
            assert np.abs(be.M[b] - ev.M).max() < 1e-12
            assert np.abs(be.H[b] - ev.H).max() < 1e-11
            assert abs(be.rho_R[b] - ev.rho_R) < 1e-12
            assert abs(be.L[b] - ev.L) < 1e-12
            assert abs(be.rho_bias[b] - ev.rho_bias) < 1e-10
            for nm in names:
                assert np.abs(be.markers[nm].jacobian[b] - ev.markers[nm].jacobian).max() < 1e-12


def test_mirrored_crouch_com_is_sagittal(params, full, lite):
    # mirrored full-model pose and its 5-link counterpart share the CoM x/z
    pose = params.poses["crouch"]
    qf = np.zeros(full.n)
    for name, val in pose.items():
        qf[full.index(name)] = val
    ql = np.zeros(lite.n)
    for name in ("hip_pitch", "knee", "ankle_pitch"):
        ql[lite.index(name)] = pose["r_" + name]
    ql[lite.index("shoulder")] = pose["r_shoulder"]
    cf = centroidal_quantities(full, qf, np.zeros(full.n))
    cl = centroidal_quantities(lite, ql, np.zeros(lite.n))
    assert abs(cf["com_position"][1]) < 1e-12
    assert abs(cf["com_position"][0] - cl["com_position"][0]) < 1e-9
    assert abs(cf["com_position"][2] - cl["com_position"][2]) < 1e-9
    assert abs(cf["rho_R"] - cl["rho_R"]) < 1e-9
