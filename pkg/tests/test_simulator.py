import csv

import numpy as np
import pytest

from sdrenet.errors import DimensionMismatch, InvalidConfig, NonFiniteState
from sdrenet.fnn import Architecture, init_params
from sdrenet.models import allen_cahn_system, cucker_smale_system, grid, linear_system
from sdrenet.simulator import (
    LinearFeedback,
    NetworkControl,
    SdreControl,
    Trajectory,
    ValueNetworkControl,
    ZeroControl,
    auto_substeps,
    simulate,
    step_rk4,
    total_cost,
    write_trajectory_csv,
)


def decay(rate=1.0):
    return linear_system([[-rate]], [[1.0]], [[1.0]], [[1.0]])


def test_rk4_hand_value():
    x1 = step_rk4(decay(), np.array([1.0]), np.zeros(1), 0.1)[0]
    # 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
    assert x1 == pytest.approx(0.9048375, abs=1e-15)
    assert abs(x1 - np.exp(-0.1)) <= 1e-7


def test_rk4_equilibrium_fixed():
    sys = allen_cahn_system()
    x = np.ones(51)
    np.testing.assert_allclose(step_rk4(sys, x, np.zeros(1), 0.001), x, atol=1e-15)


def test_rk4_one_step_order():
    sys = linear_system([[0.0, 1.0], [-4.0, -0.3]], [[0.0], [1.0]], np.eye(2), [[1.0]])
    x0 = np.array([1.0, 0.5])
    from scipy.linalg import expm

    A = sys.A(x0)
    errs = [np.linalg.norm(step_rk4(sys, x0, np.zeros(1), h) - expm(A * h) @ x0) for h in (0.1, 0.05)]
    # local error is O(h^5): halving gives ~32x; at least 16x required
    assert errs[0] / errs[1] >= 16


def test_rk4_global_order():
    errs = []
    for dt in (0.1, 0.05, 0.025):
        tr = simulate(decay(), ZeroControl(1), np.array([1.0]), T=1.0, dt=dt, substeps=1)
        errs.append(abs(tr.final_state[0] - np.exp(-1.0)))
    assert errs[0] / errs[1] >= 15 and errs[1] / errs[2] >= 15


def test_non_finite_state_from_step():
    sys = linear_system([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(NonFiniteState):
        step_rk4(sys, np.array([1e300]), np.zeros(1), 1e10)


def test_zero_from_origin():
    sys = allen_cahn_system()
    tr = simulate(sys, ZeroControl(1), np.zeros(51), T=1.0, dt=0.01)
    assert not tr.states.any() and not tr.cost.any()
    assert total_cost(tr, sys.Q, sys.R) == 0.0


def test_trajectory_invariants():
    sys = cucker_smale_system()
    x0 = np.tile(np.linspace(0, 0.4, 20), 2)
    tr = simulate(sys, SdreControl(sys, refresh_steps=5), x0, T=1.0, dt=0.05)
    np.testing.assert_allclose(np.diff(tr.times), 0.05, rtol=1e-12)
    assert tr.states.shape == (21, 40) and tr.controls.shape == (20, 20)
    assert np.all(np.diff(tr.cost) >= 0)
    assert tr.cost[-1] == pytest.approx(total_cost(tr, sys.Q, sys.R), rel=1e-12)


def test_total_cost_examples():
    tr = Trajectory(np.linspace(0, 1, 11), np.ones((11, 1)), np.zeros((10, 1)), np.zeros(11))
    assert total_cost(tr, [[1.0]], [[1.0]]) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DimensionMismatch):
        total_cost(tr, np.eye(2), [[1.0]])


def test_sdre_matches_lqr_on_linear_system():
    A = np.array([[0.0, 1.0], [2.0, -1.0]])
    sys = linear_system(A, [[0.0], [1.0]], np.eye(2), [[1.0]])
    x0 = np.array([1.0, -0.5])
    a = simulate(sys, SdreControl(sys), x0, T=5.0, dt=0.01)
    b = simulate(sys, LinearFeedback.at_origin(sys), x0, T=5.0, dt=0.01)
    assert np.abs(a.states - b.states).max() <= 1e-10
    assert abs(a.cost[-1] - b.cost[-1]) <= 1e-10


def test_sdre_refresh_holds_gain():
    sys = allen_cahn_system()
    ctrl = SdreControl(sys, refresh_steps=3)
    x = np.linspace(-1, 1, 51)
    ctrl(0, x)
    K0 = ctrl.K.copy()
    ctrl(1, 0.5 * x)
    np.testing.assert_array_equal(ctrl.K, K0)
    ctrl(3, 0.5 * x)
    assert not np.array_equal(ctrl.K, K0)
    with pytest.raises(InvalidConfig):
        SdreControl(sys, refresh_steps=0)


def test_zero_control_allen_cahn_reaches_one():
    sys = allen_cahn_system()
    xi = grid(51)
    tr = simulate(sys, ZeroControl(1), 1 + (1 - xi) * xi, T=10.0, dt=0.01)
    assert np.abs(tr.final_state - 1).max() <= 0.05


def test_sdre_contracts_small_states():
    for sys, x0 in (
        (allen_cahn_system(), 0.4 * np.cos(np.pi * grid(51))),
        (cucker_smale_system(), np.tile(np.linspace(0, 0.4, 20), 2)),
    ):
        tr = simulate(sys, SdreControl(sys, refresh_steps=10), x0, T=10.0, dt=0.01)
        assert np.linalg.norm(tr.final_state) < np.linalg.norm(x0)


def test_sdre_cost_below_zero_control_cucker_smale():
    sys = cucker_smale_system()
    x0 = np.tile(np.linspace(0, 0.4, 20), 2)
    c_sdre = simulate(sys, SdreControl(sys, refresh_steps=10), x0, T=10.0, dt=0.01).cost[-1]
    c_zero = simulate(sys, ZeroControl(20), x0, T=10.0, dt=0.01).cost[-1]
    assert c_sdre < c_zero


def test_blowup_guard_returns_partial():
    sys = linear_system([[5.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(NonFiniteState) as info:
        simulate(sys, ZeroControl(1), np.array([1.0]), T=10.0, dt=0.01)
    err = info.value
    assert 2.5 < err.time < 3.0
    assert err.trajectory.meta["diverged"] and np.abs(err.trajectory.final_state).max() > 1e6


def test_auto_substeps_allen_cahn():
    sys = allen_cahn_system()
    xi = grid(51)
    assert auto_substeps(sys, 1 + (1 - xi) * xi, 0.01) == 6
    assert auto_substeps(decay(), np.array([1.0]), 0.01) == 1


def test_config_errors():
    sys = decay()
    with pytest.raises(InvalidConfig):
        simulate(sys, ZeroControl(1), np.array([1.0]), T=1.0, dt=0.3)
    with pytest.raises(DimensionMismatch):
        simulate(sys, ZeroControl(1), np.array([1.0, 2.0]), T=1.0, dt=0.1)
    with pytest.raises(DimensionMismatch):
        simulate(sys, ZeroControl(2), np.array([1.0]), T=1.0, dt=0.1)


def test_network_controllers():
    sys = allen_cahn_system(__import__("sdrenet").AllenCahnConfig(N=5))
    pv = init_params(Architecture.uniform(5, 1, 4, 1, "tanh"), 0)
    pd = init_params(Architecture.uniform(5, 1, 4, 1, "tanh"), 1)
    B = sys.B(np.zeros(5))
    x0 = np.full(5, 0.3)
    for ctrl in (ValueNetworkControl(pv, B, sys.R), NetworkControl(pd)):
        tr = simulate(sys, ctrl, x0, T=0.1, dt=0.01)
        assert np.isfinite(tr.states).all() and tr.meta["controller"] == ctrl.label


def test_trajectory_csv(tmp_path):
    sys = cucker_smale_system(__import__("sdrenet").CuckerSmaleConfig(N_a=2))
    tr = simulate(sys, SdreControl(sys), np.array([0.0, 0.4, 0.1, -0.1]), T=0.05, dt=0.01)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(tr, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x_1", "x_2", "x_3", "x_4", "u_1", "u_2", "cost"]
    assert len(rows) == 7
    data = np.array(rows[1:], dtype=float)
    assert data[:, 1:5].tobytes() == tr.states.tobytes()
    np.testing.assert_array_equal(data[-1, 5:7], tr.controls[-1])
