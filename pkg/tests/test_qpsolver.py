"""QP solver oracles: brute-force active-set enumeration on random small
problems, plus scaling/determinism invariants.
"""
import numpy as np
import pytest

from jumpopt.qpsolver import QpOptions, QpProblem, QpSolution, solve


def brute_force(W, f, A_eq, b_eq, A_in, b_in):
    """Enumerate every subset of inequalities as active; keep the best
    feasible KKT point.  Independent of the solver's working-set logic.
    """
    n = f.shape[0]
    m = 0 if A_in is None else A_in.shape[0]
    me = 0 if A_eq is None else A_eq.shape[0]
    best, best_obj = None, np.inf
    for mask in range(1 << m):
        act = [i for i in range(m) if mask >> i & 1]
        rows = []
        rhs = []
        if me:
            rows.append(A_eq)
            rhs.append(b_eq)
        if act:
            rows.append(A_in[act])
            rhs.append(b_in[act])
        A = np.vstack(rows) if rows else np.zeros((0, n))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        k = A.shape[0]
        K = np.zeros((n + k, n + k))
        K[:n, :n] = W
        K[:n, n:] = A.T
        K[n:, :n] = A
        rhs = np.concatenate([-f, b])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.abs(K @ sol - rhs).max() > 1e-8:  # near-singular working set
            continue
        x, mult = sol[:n], sol[n:]
        lam = -mult[me:]  # sign flip: KKT solved as W x + A' mu = -f
        if k and np.abs(A @ x - b).max() > 1e-8:
            continue
        if m and (A_in @ x - b_in).min() < -1e-9:
            continue
        if act and lam.min() < -1e-9:
            continue
        obj = 0.5 * x @ W @ x + f @ x
        if obj < best_obj - 1e-12:
            best, best_obj = x, obj
    return best


def random_problem(rng, n, m_in, m_eq=0):
    A = rng.standard_normal((n, n))
    W = A.T @ A + 0.1 * np.eye(n)
    f = rng.standard_normal(n)
    A_in = rng.standard_normal((m_in, n)) if m_in else None
    b_in = rng.standard_normal(m_in) - 1.0 if m_in else None
    A_eq = rng.standard_normal((m_eq, n)) if m_eq else None
    b_eq = rng.standard_normal(m_eq) if m_eq else None
    return W, f, A_eq, b_eq, A_in, b_in


def test_scalar_bound():
    sol = solve(QpProblem(W=np.array([[2.0]]), f=np.array([0.0]),
                          A_in=np.array([[1.0]]), b_in=np.array([1.0])))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-10)


def test_unconstrained_identity():
    sol = solve(QpProblem(W=np.eye(2), f=np.array([-1.0, -2.0])))
    assert sol.status == "optimal"
    assert np.allclose(sol.x, [1.0, 2.0], atol=1e-10)


def test_matches_brute_force_enumeration():
    rng = np.random.default_rng(20)
    checked = 0
    for _ in range(500):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(0, 5))
        me = int(rng.integers(0, min(n - 1, 2) + 1))
        W, f, A_eq, b_eq, A_in, b_in = random_problem(rng, n, m, me)
        want = brute_force(W, f, A_eq, b_eq, A_in, b_in)
        sol = solve(QpProblem(W=W, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in))
        if want is None:
            assert sol.status != "optimal"
            continue
        assert sol.status == "optimal"
        assert np.abs(sol.x - want).max() < 1e-7
        assert sol.kkt_residual <= 1e-9
        checked += 1
    assert checked > 400


def test_inconsistent_equalities_reported_infeasible():
    prob = QpProblem(
        W=np.eye(2), f=np.zeros(2),
        A_eq=np.array([[1.0, 0.0], [1.0, 0.0]]), b_eq=np.array([0.0, 1.0]),
    )
    assert solve(prob).status == "infeasible"


def test_infeasible_inequalities_reported():
    prob = QpProblem(
        W=np.eye(1), f=np.zeros(1),
        A_in=np.array([[1.0], [-1.0]]), b_in=np.array([1.0, 1.0]),  # x >= 1 and x <= -1
    )
    assert solve(prob).status == "infeasible"


def test_objective_scaling_invariance():
    rng = np.random.default_rng(21)
    W, f, A_eq, b_eq, A_in, b_in = random_problem(rng, 5, 4, 1)
    base = solve(QpProblem(W=W, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in))
    for alpha in (0.01, 7.3, 400.0):
        scaled = solve(QpProblem(W=alpha * W, f=alpha * f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in))
        assert scaled.status == "optimal"
        assert np.abs(scaled.x - base.x).max() < 1e-7


def test_non_binding_inequality_is_inert():
    rng = np.random.default_rng(22)
    W, f, *_ = random_problem(rng, 4, 0)
    sol0 = solve(QpProblem(W=W, f=f))
    # add a constraint satisfied with slack at the optimum
    a = rng.standard_normal(4)
    b = a @ sol0.x - 5.0
    sol1 = solve(QpProblem(W=W, f=f, A_in=a[None, :], b_in=np.array([b])))
    assert np.abs(sol1.x - sol0.x).max() < 1e-9


def test_deterministic_bitwise():
    rng = np.random.default_rng(23)
    W, f, A_eq, b_eq, A_in, b_in = random_problem(rng, 6, 4, 2)
    a = solve(QpProblem(W=W, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in))
    b2 = solve(QpProblem(W=W, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in))
    assert a.x.tobytes() == b2.x.tobytes()
    assert a.kkt_residual == b2.kkt_residual


def test_warm_start_reaches_same_solution():
    rng = np.random.default_rng(24)
    W, f, A_eq, b_eq, A_in, b_in = random_problem(rng, 6, 4, 1)
    cold = solve(QpProblem(W=W, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in))
    if cold.status != "optimal":
        pytest.skip("random instance infeasible")
    warm = solve(
        QpProblem(W=W, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in,
                  warm_start=cold.x, warm_active=cold.active_set)
    )
    assert warm.status == "optimal"
    assert np.abs(warm.x - cold.x).max() < 1e-8


def test_semidefinite_cost_regularized():
    # rank-deficient least-squares form: solver must still return cleanly
    G = np.array([[1.0, 1.0, 0.0]])
    W = G.T @ G
    f = -G.T @ np.array([2.0])
    sol = solve(QpProblem(W=W, f=f))
    assert sol.status == "optimal"
    assert sol.reg == 1e-10
    assert G @ sol.x == pytest.approx(2.0, abs=1e-6)
