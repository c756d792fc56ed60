"""Pointwise state-dependent Riccati synthesis."""

from dataclasses import dataclass

import numpy as np

from .errors import NotStabilizable
from .riccati import LtiData, solve_care

DEFAULT_TOL = 1e-9


@dataclass
class SdreSample:
    x: np.ndarray
    u: np.ndarray
    V: float
    gradV: np.ndarray
    Pi: np.ndarray
    residual: float


def frozen_lti(sys, x):
    """The linear-quadratic problem obtained by freezing A(x), B(x) at ``x``."""
    return LtiData(sys.A(x), sys.B(x), sys.Q, sys.R)


def sdre_solve(sys, x, tol=DEFAULT_TOL):
    """Solve the frozen CARE at ``x`` and return feedback, value and gradient.

    Raises NotStabilizable (with ``.x`` set) when the frozen pair admits no
    stabilizing solution; callers decide whether to drop the state.
    """
    x = np.asarray(x, dtype=float)
    lti = frozen_lti(sys, x)
    try:
        sol = solve_care(lti, tol)
    except NotStabilizable as exc:
        raise NotStabilizable(f"not stabilizable at state: {exc}", x=x) from None
    Pix = sol.Pi @ x
    u = -sol.K @ x
    return SdreSample(
        x=x,
        u=u,
        V=float(x @ Pix),
        gradV=2.0 * Pix,
        Pi=sol.Pi,
        residual=sol.residual,
    )


def sdre_gain(sys, x, tol=DEFAULT_TOL):
    """K(x) = R^{-1} B(x)^T Pi(x)."""
    return solve_care(frozen_lti(sys, np.asarray(x, dtype=float)), tol).K


def linear_gain_at_origin(sys, tol=DEFAULT_TOL):
    """LQR gain of the system linearized (frozen) at the origin."""
    return sdre_gain(sys, np.zeros(sys.n), tol)
