"""Limited-memory BFGS with a backtracking Armijo line search."""

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    evaluations: int
    gamma: float


def two_loop(g, S, Y, gamma):
    """Apply the inverse-Hessian approximation to ``g``."""
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q -= a * y
    r = gamma * q
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return r


def minimize(fun, x0, max_iter=20, memory=10, c1=1e-4, max_backtracks=30, gamma=None, gtol=1e-12):
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    ``gamma`` seeds the initial inverse-Hessian scale; when omitted the first
    step is a gradient step normalized to unit length.  Non-finite trial
    values are treated as failed Armijo tests.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    evals = 1
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if not gnorm > gtol:
            it -= 1
            break
        if S:
            d = -two_loop(g, S, Y, gamma)
        elif gamma is not None:
            d = -gamma * g
        else:
            d = -g / gnorm
        slope = float(g @ d)
        if not slope < 0:
            S.clear()
            Y.clear()
            d = -g / gnorm
            slope = -gnorm

        step = 1.0
        for _ in range(max_backtracks):
            x_try = x + step * d
            f_try, g_try = fun(x_try)
            evals += 1
            if np.isfinite(f_try) and f_try <= f + c1 * step * slope:
                break
            step *= 0.5
        else:
            it -= 1
            break

        s = x_try - x
        y = g_try - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            S.append(s)
            Y.append(y)
            gamma = sy / float(y @ y)
        x, f, g = x_try, f_try, g_try
    return LbfgsResult(x=x, f=f, g=g, iterations=it, evaluations=evals, gamma=gamma)
