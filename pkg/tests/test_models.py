import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdrenet.errors import DimensionMismatch, InvalidConfig
from sdrenet.models import (
    AllenCahnConfig,
    CuckerSmaleConfig,
    allen_cahn_system,
    cucker_smale_system,
    drift,
    grid,
    interaction_kernel,
    linear_system,
    make_system,
    neumann_laplacian,
)


def cs_drift_direct(x, N_a):
    """Cucker-Smale written agent by agent."""
    y, v = x[:N_a], x[N_a:]
    vdot = np.zeros(N_a)
    for i in range(N_a):
        for j in range(N_a):
            vdot[i] += (v[j] - v[i]) / (1.0 + (y[i] - y[j]) ** 2)
    return np.concatenate([v, vdot / N_a])


def ac_drift_direct(x, nu=0.1):
    """Allen-Cahn with the reflected three-point stencil written out."""
    N = len(x)
    h = 1.0 / (N - 1)
    lap = np.empty(N)
    for i in range(N):
        left = x[i - 1] if i > 0 else x[1]
        right = x[i + 1] if i < N - 1 else x[N - 2]
        lap[i] = (left - 2 * x[i] + right) / h**2
    return nu * lap + x - x**3


@pytest.mark.parametrize("d,expected", [(0.0, 1.0), (1.0, 0.5), (3.0, 0.1)])
def test_kernel_values(d, expected):
    assert interaction_kernel([0.0], [d]) == pytest.approx(expected, abs=1e-15)
    assert interaction_kernel([0.0, 0.0], [0.0, d]) == pytest.approx(expected, abs=1e-15)


def test_kernel_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        interaction_kernel([0.0], [0.0, 1.0])


def test_cs_shapes_and_weights():
    sys = cucker_smale_system()
    assert (sys.n, sys.m) == (40, 20)
    np.testing.assert_array_equal(sys.Q, np.eye(40) / 20)
    np.testing.assert_array_equal(sys.R, np.eye(20))
    assert np.all(sys.domain_lower == -3) and np.all(sys.domain_upper == 3)
    B = sys.B(np.zeros(40))
    np.testing.assert_array_equal(B, np.vstack([np.zeros((20, 20)), np.eye(20)]))


def test_cs_two_agent_hand_value():
    sys = cucker_smale_system(CuckerSmaleConfig(N_a=2))
    A = sys.A(np.array([0.0, 1.0, 0.0, 0.0]))
    np.testing.assert_allclose(A[2:, 2:], 0.5 * np.array([[-0.5, 0.5], [0.5, -0.5]]), atol=1e-16)
    np.testing.assert_array_equal(A[:2, 2:], np.eye(2))
    np.testing.assert_array_equal(A[:2, :2], 0.0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 20, elements=st.floats(-3, 3)))
def test_cs_rows_sum_to_zero(y):
    sys = cucker_smale_system()
    C = sys.A(np.concatenate([y, np.zeros(20)]))[20:, 20:]
    assert np.abs(C.sum(axis=1)).max() <= 1e-13


def test_cs_consensus_and_rest():
    sys = cucker_smale_system()
    rng = np.random.default_rng(0)
    y = rng.uniform(-3, 3, 20)
    f = drift(sys, np.concatenate([y, np.full(20, 0.7)]))
    np.testing.assert_allclose(f[20:], 0.0, atol=1e-15)
    np.testing.assert_array_equal(drift(sys, np.concatenate([y, np.zeros(20)])), 0.0)


def test_cs_matches_direct_drift():
    sys = cucker_smale_system()
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = rng.uniform(-3, 3, 40)
        ref = cs_drift_direct(x, 20)
        np.testing.assert_allclose(drift(sys, x), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_laplacian_neumann_rows():
    for N in (3, 5, 51):
        L = neumann_laplacian(N)
        assert np.abs(L.sum(axis=1)).max() <= 1e-9 * (N - 1) ** 2
    L = neumann_laplacian(3)
    np.testing.assert_array_equal(L, 4 * np.array([[-2, 2, 0], [1, -2, 1], [0, 2, -2]]))


def test_ac_defaults():
    sys = allen_cahn_system()
    assert (sys.n, sys.m) == (51, 1)
    h = 1 / 50
    np.testing.assert_allclose(sys.Q, h * np.eye(51))
    np.testing.assert_array_equal(sys.R, [[0.1]])
    b = sys.B(np.zeros(51))[:, 0]
    xi = grid(51)
    np.testing.assert_array_equal(b, ((xi >= 0.6 - 1e-12) & (xi <= 0.9 + 1e-12)).astype(float))
    assert b.sum() == 16 and b[30] == 1 and b[45] == 1 and b[29] == 0 and b[46] == 0
    np.testing.assert_allclose(sys.A(np.zeros(51)), 0.1 * neumann_laplacian(51) + np.eye(51))


@pytest.mark.parametrize("c", [-1.0, 0.0, 1.0])
def test_ac_equilibria(c):
    sys = allen_cahn_system()
    np.testing.assert_allclose(drift(sys, np.full(51, c)), 0.0, atol=1e-11)


def test_ac_half_constant():
    f = drift(allen_cahn_system(), np.full(51, 0.5))
    np.testing.assert_allclose(f, 0.375, atol=1e-11)


def test_ac_matches_direct_drift():
    sys = allen_cahn_system()
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.uniform(-2, 2, 51)
        ref = ac_drift_direct(x)
        np.testing.assert_allclose(drift(sys, x), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_ac_printed_nonlinearity_option():
    sys = allen_cahn_system(AllenCahnConfig(nonlinearity="printed"))
    f = drift(sys, np.full(51, 0.5))
    np.testing.assert_allclose(f, 0.5 * 1.25, atol=1e-11)


def test_inputs_constant_in_state():
    rng = np.random.default_rng(3)
    for sys in (cucker_smale_system(), allen_cahn_system()):
        x1, x2 = rng.uniform(-1, 1, (2, sys.n))
        np.testing.assert_array_equal(sys.B(x1), sys.B(x2))


@pytest.mark.parametrize("bad", [
    dict(N=2), dict(diffusion=0.0), dict(omega_lo=0.9, omega_hi=0.6),
    dict(omega_hi=1.2), dict(nonlinearity="cubic"), dict(control_weight=-1.0),
])
def test_ac_invalid_config(bad):
    with pytest.raises(InvalidConfig):
        allen_cahn_system(AllenCahnConfig(**bad))


def test_cs_invalid_config():
    with pytest.raises(InvalidConfig):
        cucker_smale_system(CuckerSmaleConfig(N_a=1))


def test_state_length_checked():
    with pytest.raises(DimensionMismatch):
        drift(allen_cahn_system(), np.zeros(50))


def test_linear_system_and_registry():
    sys = linear_system([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]], np.eye(2), [[1.0]])
    x = np.array([1.0, 2.0])
    np.testing.assert_array_equal(drift(sys, x), [2.0, -1.0])
    assert make_system("cucker_smale", N_a=3).n == 6
    assert make_system("allen_cahn", N=11).n == 11
    assert make_system("linear", A=[[1.0]], B=[1.0]).m == 1
    with pytest.raises(InvalidConfig):
        make_system("lorenz")
