"""Closed-loop simulation with zero-order-hold controls and cost accounting."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, NonFiniteState
from .sdre import DEFAULT_TOL, linear_gain_at_origin, sdre_gain

BLOWUP = 1e6


# -- controllers --------------------------------------------------------------


class Controller:
    label = "controller"

    def reset(self):
        pass

    def __call__(self, step, x):
        raise NotImplementedError


class ZeroControl(Controller):
    label = "zero"

    def __init__(self, m):
        self.m = m

    def __call__(self, step, x):
        return np.zeros(self.m)


class LinearFeedback(Controller):
    """u = -K0 x with a fixed gain."""

    label = "linear_k0"

    def __init__(self, K):
        self.K = np.atleast_2d(np.asarray(K, dtype=float))

    @classmethod
    def at_origin(cls, sys, tol=DEFAULT_TOL):
        return cls(linear_gain_at_origin(sys, tol))

    def __call__(self, step, x):
        return -self.K @ x


class SdreControl(Controller):
    """Receding-horizon SDRE law.

    The gain is recomputed from the current state every ``refresh_steps``
    steps and held in between; the control always multiplies the current state.
    """

    label = "sdre"

    def __init__(self, sys, refresh_steps=1, tol=DEFAULT_TOL):
        if refresh_steps < 1:
            raise InvalidConfig("refresh_steps must be >= 1")
        self.sys = sys
        self.refresh_steps = int(refresh_steps)
        self.tol = tol
        self.K = None

    def reset(self):
        self.K = None

    def __call__(self, step, x):
        if self.K is None or step % self.refresh_steps == 0:
            self.K = sdre_gain(self.sys, x, self.tol)
        return -self.K @ x


class NetworkControl(Controller):
    """u = u_theta(x) from a vector-output network."""

    label = "nn_direct"

    def __init__(self, params):
        self.params = params

    def __call__(self, step, x):
        from .fnn import forward

        return forward(self.params, x)


class ValueNetworkControl(Controller):
    """u = -1/2 R^{-1} B^T grad V_theta(x)."""

    label = "nn_value"

    def __init__(self, params, B, R):
        self.params = params
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))

    def __call__(self, step, x):
        from .fnn import feedback_from_value

        return feedback_from_value(self.params, self.B, self.R, x)


# -- integration --------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    cost: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def final_state(self):
        return self.states[-1]


def _rhs(sys, x, u):
    return sys.A(x) @ x + sys.B(x) @ u


def step_rk4(sys, x, u, dt):
    """One classical Runge-Kutta step with the control held constant."""
    if not dt > 0:
        raise InvalidConfig("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    # overflow surfaces below as NonFiniteState
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = _rhs(sys, x, u)
        k2 = _rhs(sys, x + 0.5 * dt * k1, u)
        k3 = _rhs(sys, x + 0.5 * dt * k2, u)
        k4 = _rhs(sys, x + dt * k3, u)
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_new)):
        raise NonFiniteState("non-finite state after RK4 step")
    return x_new


def _running_cost(x, u, Q, R):
    return float(x @ Q @ x), float(u @ R @ u)


def auto_substeps(sys, x0, dt, K=None):
    """RK4 substeps per control interval that keep |lambda| h inside the
    explicit stability region (|lambda h| <= 2) for the frozen closed loop at x0."""
    M = sys.A(x0)
    if K is not None:
        M = M - sys.B(x0) @ np.atleast_2d(K)
    rho = float(np.abs(np.linalg.eigvals(M)).max()) if M.size else 0.0
    return max(1, int(np.ceil(dt * rho / 2.0)))


def simulate(sys, controller, x0, T=10.0, dt=0.01, substeps="auto"):
    """Integrate the closed loop from ``x0`` over ``[0, T]``.

    ``dt`` is the control interval: the controller is sampled at the start of
    each interval and its output held while ``substeps`` RK4 steps of size
    ``dt / substeps`` advance the state.  ``substeps="auto"`` picks the
    smallest count that is explicitly stable for the open loop at ``x0``.

    Raises NonFiniteState when the state leaves the ``|x|_inf <= 1e6`` box or
    becomes non-finite; the exception carries the partial trajectory.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"x0 must have length {sys.n}")
    if not (T > 0 and dt > 0):
        raise InvalidConfig("T and dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise InvalidConfig(f"dt={dt} does not divide T={T}")

    if substeps == "auto":
        substeps = auto_substeps(sys, x, dt)
    substeps = int(substeps)
    if substeps < 1:
        raise InvalidConfig("substeps must be >= 1")
    h = dt / substeps

    controller.reset()
    states = np.empty((steps + 1, sys.n))
    controls = np.empty((steps, sys.m))
    cost = np.zeros(steps + 1)
    states[0] = x
    xq, _ = _running_cost(x, np.zeros(sys.m), sys.Q, sys.R)

    def partial(k):
        return Trajectory(
            times=dt * np.arange(k + 1),
            states=states[: k + 1].copy(),
            controls=controls[:k].copy(),
            cost=cost[: k + 1].copy(),
            meta={"controller": controller.label, "dt": dt, "substeps": substeps, "diverged": True},
        )

    for k in range(steps):
        u = np.atleast_1d(np.asarray(controller(k, x), dtype=float))
        if u.shape != (sys.m,):
            raise DimensionMismatch(f"controller returned shape {u.shape}, expected ({sys.m},)")
        try:
            x_new = x
            for _ in range(substeps):
                x_new = step_rk4(sys, x_new, u, h)
        except NonFiniteState:
            raise NonFiniteState(
                f"{controller.label}: non-finite state at t={(k + 1) * dt:g}",
                time=(k + 1) * dt,
                trajectory=partial(k),
            ) from None
        controls[k] = u
        xq_new, uru = _running_cost(x_new, u, sys.Q, sys.R)
        # trapezoid in x; u is constant over the step
        cost[k + 1] = cost[k] + 0.5 * dt * (xq + xq_new) + dt * uru
        states[k + 1] = x_new
        x, xq = x_new, xq_new
        if np.abs(x).max() > BLOWUP:
            raise NonFiniteState(
                f"{controller.label}: state exceeded {BLOWUP:g} at t={(k + 1) * dt:g}",
                time=(k + 1) * dt,
                trajectory=partial(k + 1),
            )

    return Trajectory(
        times=dt * np.arange(steps + 1),
        states=states,
        controls=controls,
        cost=cost,
        meta={"controller": controller.label, "dt": dt, "substeps": substeps, "diverged": False},
    )


def total_cost(traj, Q, R):
    """Trapezoid integral of x'Qx + u'Ru over the trajectory's time grid."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    X = np.asarray(traj.states, dtype=float)
    U = np.asarray(traj.controls, dtype=float).reshape(len(X) - 1, -1)
    if X.shape[1] != Q.shape[0] or U.shape[1] != R.shape[0]:
        raise DimensionMismatch("trajectory and weight dimensions differ")
    if len(X) < 2:
        return 0.0
    dt = np.diff(traj.times)
    xq = np.einsum("ij,jk,ik->i", X, Q, X)
    uru = np.einsum("ij,jk,ik->i", U, R, U)
    return float(np.sum(0.5 * dt * (xq[:-1] + xq[1:]) + dt * uru))


def write_trajectory_csv(traj, path):
    """Rows ``t, x_1..x_n, u_1..u_m, cost``; the last row repeats the final control."""
    X = traj.states
    U = np.asarray(traj.controls).reshape(len(traj.controls), -1)
    n = X.shape[1]
    m = U.shape[1] if U.size else int(traj.meta.get("m", 0))
    if len(U):
        U = np.vstack([U, U[-1:]])
    else:
        U = np.zeros((len(X), m))
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{j + 1}" for j in range(m)] + ["cost"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, x, u, c in zip(traj.times, X, U, traj.cost):
            w.writerow([_f(t)] + [_f(v) for v in x] + [_f(v) for v in u] + [_f(c)])


def _f(v):
    return format(float(v), ".17g")
