import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sdrenet.errors import DimensionMismatch, NotStabilizable, SingularSylvester
from sdrenet.riccati import LtiData, care_residual, solve_care, solve_lyapunov

SQRT2 = np.sqrt(2.0)
SQRT5 = np.sqrt(5.0)


def scalar_care(a, b, q, r):
    """Positive root of 2 a p - (b^2 / r) p^2 + q = 0."""
    w = b * b / r
    if w == 0:
        return -q / (2 * a)
    return (a + np.sqrt(a * a + w * q)) / w


def sympy_care_2x2(A, B, Q, R):
    """Stabilizing solution of a 2x2 CARE by exact polynomial elimination."""
    p11, p12, p22 = sp.symbols("p11 p12 p22")
    P = sp.Matrix([[p11, p12], [p12, p22]])
    As, Bs, Qs, Rs = (sp.Matrix(M) for M in (A, B, Q, R))
    E = As.T * P + P * As - P * Bs * Rs.inv() * Bs.T * P + Qs
    for sol in sp.solve([E[0, 0], E[0, 1], E[1, 1]], [p11, p12, p22], dict=True):
        Pn = np.array(P.subs(sol).evalf(30).tolist(), dtype=complex)
        if np.abs(Pn.imag).max() > 1e-25:
            continue
        Pn = Pn.real
        K = np.linalg.solve(np.array(R, float), np.array(B, float).T @ Pn)
        if np.linalg.eigvals(np.array(A, float) - np.array(B, float) @ K).real.max() < 0:
            return Pn
    raise AssertionError("no stabilizing solution")


# values frozen from sympy_care_2x2 (20 significant digits)
CASES_2X2 = [
    (
        [[0, 1], [2, -1]], [[0], [1]], [[1, 0], [0, 1]], [[1]],
        [[7 + SQRT5, 2 + SQRT5], [2 + SQRT5, SQRT5]],
    ),
    (
        [[1, 2], [0, -1]], [[1], [1]], [[1, 0], [0, 2]], [[2]],
        [[2.1259540045474867735, 1.1150051155572310999],
         [1.1150051155572310999, 1.5088527311641376905]],
    ),
    (
        [[0, 1], [0, 0]], [[0, 1], [1, 0]], [[3, 1], [1, 2]], [[1, 0], [0, 4]],
        [[2.3437417655957760879, 1.2754288039912296664],
         [1.2754288039912296664, 2.0357254111175786708]],
    ),
]


def test_scalar_unstable():
    sol = solve_care(LtiData([[1.0]], [[1.0]], [[1.0]], [[1.0]]))
    assert abs(sol.Pi[0, 0] - (1 + SQRT2)) <= 1e-12
    assert abs(sol.K[0, 0] - (1 + SQRT2)) <= 1e-12
    assert sol.closed_loop_abscissa == pytest.approx(-SQRT2)


def test_scalar_marginal():
    sol = solve_care(LtiData([[0.0]], [[1.0]], [[1.0]], [[1.0]]))
    assert sol.Pi[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert sol.K[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_zero_input_reduces_to_lyapunov():
    sol = solve_care(LtiData(-np.eye(2), np.zeros((2, 1)), np.eye(2), [[1.0]]))
    np.testing.assert_allclose(sol.Pi, 0.5 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(sol.K, 0.0, atol=1e-14)


@pytest.mark.parametrize("a,b,q,r", [(1, 1, 1, 1), (0, 1, 1, 1), (-2, 0.5, 3, 0.1), (4, 2, 0.5, 7)])
def test_scalar_closed_form(a, b, q, r):
    sol = solve_care(LtiData([[a]], [[b]], [[q]], [[r]]))
    assert sol.Pi[0, 0] == pytest.approx(scalar_care(a, b, q, r), rel=1e-12)


@pytest.mark.parametrize("A,B,Q,R,expected", CASES_2X2)
def test_2x2_against_frozen_elimination(A, B, Q, R, expected):
    sol = solve_care(LtiData(A, B, Q, R))
    np.testing.assert_allclose(sol.Pi, np.array(expected), rtol=1e-8, atol=1e-12)


def test_2x2_oracle_reproduces_frozen_values():
    A, B, Q, R, expected = CASES_2X2[1]
    np.testing.assert_allclose(sympy_care_2x2(A, B, Q, R), expected, rtol=1e-15)


def test_residual_zero_pi():
    sys = LtiData(np.zeros((3, 3)), np.ones((3, 1)), np.eye(3), [[1.0]])
    assert care_residual(sys, np.zeros((3, 3))) == pytest.approx(np.sqrt(3.0))


def test_residual_closed_form_root():
    sys = LtiData([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert care_residual(sys, [[1 + SQRT2]]) <= 1e-12


def test_residual_shape_mismatch():
    sys = LtiData(np.eye(2), np.ones((2, 1)), np.eye(2), [[1.0]])
    with pytest.raises(DimensionMismatch):
        care_residual(sys, np.eye(3))


def test_dimension_mismatch_in_data():
    with pytest.raises(DimensionMismatch):
        LtiData(np.eye(2), np.ones((3, 1)), np.eye(2), [[1.0]])
    with pytest.raises(DimensionMismatch):
        LtiData(np.eye(2), np.ones((2, 1)), np.eye(2), np.eye(2))


def test_not_stabilizable_uncontrolled_unstable_mode():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(NotStabilizable):
        solve_care(LtiData(A, B, np.eye(2), [[1.0]]))


def test_not_stabilizable_imaginary_axis():
    # undamped oscillator without input: Hamiltonian eigenvalues at +-i
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(NotStabilizable):
        solve_care(LtiData(A, np.zeros((2, 1)), np.zeros((2, 2)), [[1.0]]))


def _random_system(rng, n, m):
    A = rng.standard_normal((n, n)) / np.sqrt(n) - 0.8 * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((n, n)) / np.sqrt(n)
    Rh = rng.standard_normal((m, m))
    return LtiData(A, B, C.T @ C + 0.1 * np.eye(n), Rh @ Rh.T + np.eye(m))


def test_random_invariants():
    rng = np.random.default_rng(7)
    for _ in range(20):
        sys = _random_system(rng, int(rng.integers(2, 25)), int(rng.integers(1, 4)))
        sol = solve_care(sys)
        Pi = sol.Pi
        assert np.linalg.norm(Pi - Pi.T) <= 1e-10 * np.linalg.norm(Pi)
        assert np.linalg.eigvalsh(Pi).min() >= -1e-10
        assert sol.residual <= 1e-9 * max(1.0, np.linalg.norm(sys.Q))
        assert np.linalg.eigvals(sys.A - sys.B @ sol.K).real.max() < 0
        np.testing.assert_allclose(sol.K, np.linalg.solve(sys.R, sys.B.T @ Pi), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.01, 100.0), seed=st.integers(0, 2**16))
def test_weight_scaling(c, seed):
    rng = np.random.default_rng(seed)
    sys = _random_system(rng, 4, 2)
    base = solve_care(sys)
    scaled = solve_care(LtiData(sys.A, sys.B, c * sys.Q, c * sys.R))
    np.testing.assert_allclose(scaled.Pi, c * base.Pi, rtol=1e-8, atol=1e-12 * c)
    np.testing.assert_allclose(scaled.K, base.K, rtol=1e-8, atol=1e-10 * np.abs(base.K).max())


def test_stable_zero_input_matches_lyapunov():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 5)) / np.sqrt(5) - 2 * np.eye(5)
    C = rng.standard_normal((5, 5))
    Q = C.T @ C
    sol = solve_care(LtiData(A, np.zeros((5, 1)), Q, [[1.0]]))
    X = solve_lyapunov(A, Q)
    np.testing.assert_allclose(sol.Pi, X, atol=1e-10 * np.linalg.norm(X))


def test_lyapunov_scalar_and_diagonal():
    assert solve_lyapunov([[-1.0]], [[2.0]])[0, 0] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2)), np.diag([0.5, 0.25]), atol=1e-15)


def test_lyapunov_random_stable():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((5, 5)) - 4 * np.eye(5)
    C = rng.standard_normal((5, 5))
    Q = C.T @ C
    X = solve_lyapunov(A, Q)
    res = np.linalg.norm(A.T @ X + X @ A + Q)
    assert res <= 1e-10 * np.linalg.norm(Q)
    assert np.linalg.eigvalsh(X).min() >= -1e-12


def test_lyapunov_singular():
    with pytest.raises(SingularSylvester):
        solve_lyapunov(np.diag([1.0, -1.0]), np.eye(2))
