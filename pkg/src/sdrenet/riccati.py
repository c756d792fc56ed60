"""Dense continuous-time algebraic Riccati and Lyapunov solvers.

The CARE

    A^T P + P A - P B R^{-1} B^T P + Q = 0

is solved by an ordered real Schur decomposition of the Hamiltonian matrix
followed by Newton-Kleinman refinement.  Every solution carries its residual
so callers can verify it.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NoConvergence, NotStabilizable, SingularSylvester

# |Re(lambda)| below this fraction of ||H||_F counts as "on the imaginary axis"
IMAG_AXIS_RTOL = 1e-9
MAX_NEWTON_STEPS = 10


@dataclass
class LtiData:
    """Frozen linear-quadratic problem data."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim < 2:
            self.B = self.B.reshape(self.A.shape[0], -1)
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.check()

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def check(self):
        A, B, Q, R = self.A, self.B, self.Q, self.R
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
        m = B.shape[1]
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q must be {n}x{n}, got {Q.shape}")
        if R.shape != (m, m):
            raise DimensionMismatch(f"R must be {m}x{m}, got {R.shape}")
        qn = np.linalg.norm(Q)
        if np.linalg.norm(Q - Q.T) > 1e-12 * qn:
            raise ValueError("Q must be symmetric")
        if n and np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.norm(R - R.T) > 1e-12 * np.linalg.norm(R):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")


@dataclass
class RiccatiSolution:
    Pi: np.ndarray
    K: np.ndarray
    residual: float
    closed_loop_abscissa: float


def care_residual(sys, Pi):
    """Frobenius norm of the CARE residual at ``Pi``."""
    Pi = np.atleast_2d(np.asarray(Pi, dtype=float))
    if Pi.shape != sys.A.shape:
        raise DimensionMismatch(f"Pi must be {sys.A.shape}, got {Pi.shape}")
    return float(np.linalg.norm(_residual_matrix(sys, Pi)))


def _residual_matrix(sys, Pi):
    A, B, Q, R = sys.A, sys.B, sys.Q, sys.R
    PB = Pi @ B
    return A.T @ Pi + Pi @ A - PB @ np.linalg.solve(R, PB.T) + Q


def solve_lyapunov(A, Q):
    """Solve ``A^T X + X A + Q = 0`` for symmetric ``X``.

    Raises SingularSylvester when two eigenvalues of ``A`` (nearly) sum to
    zero, in which case the solution is not unique.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise DimensionMismatch(f"A {A.shape} and Q {Q.shape} must be square and equal")
    lam = np.linalg.eigvals(A)
    sep = np.abs(lam[:, None] + lam[None, :]).min()
    if sep <= 1e-13 * max(1.0, np.linalg.norm(A)):
        raise SingularSylvester(f"eigenvalue sum {sep:.3e} too close to zero")
    X = sla.solve_continuous_lyapunov(A.T, -Q)
    X = 0.5 * (X + X.T)
    return X


def _hamiltonian_pi(sys, W):
    n = sys.n
    H = np.block([[sys.A, -W], [-sys.Q, -sys.A.T]])
    hnorm = np.linalg.norm(H)
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    eig_re = _schur_real_parts(T)
    if np.abs(eig_re).min() <= IMAG_AXIS_RTOL * hnorm:
        raise NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis")
    if sdim != n:
        raise NotStabilizable(f"stable invariant subspace has dimension {sdim}, expected {n}")
    U11 = Z[:n, :n]
    U21 = Z[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise NotStabilizable("stable invariant subspace is not a graph (U11 singular)")
    Pi = np.linalg.solve(U11.T, U21.T).T
    return 0.5 * (Pi + Pi.T)


def _schur_real_parts(T):
    # diagonal of a quasi-triangular real Schur form gives Re(lambda) for 1x1
    # and 2x2 blocks alike
    return np.diag(T)


def _abscissa(M):
    return float(np.linalg.eigvals(M).real.max()) if M.size else -np.inf


def solve_care(sys, tol=1e-9):
    """Stabilizing solution of the continuous-time algebraic Riccati equation.

    The Schur estimate is polished by Newton-Kleinman steps until the residual
    drops below ``tol * max(1, ||Q||_F)`` or stops decreasing.
    """
    if not isinstance(sys, LtiData):
        sys = LtiData(*sys)
    A, B, R = sys.A, sys.B, sys.R
    n = sys.n
    if n == 0:
        raise DimensionMismatch("empty system")
    RinvBT = np.linalg.solve(R, B.T)
    W = B @ RinvBT
    W = 0.5 * (W + W.T)
    target = tol * max(1.0, float(np.linalg.norm(sys.Q)))

    Pi = _hamiltonian_pi(sys, W)
    resid = _residual_matrix(sys, Pi)
    best_pi, best_res = Pi, float(np.linalg.norm(resid))
    for _ in range(MAX_NEWTON_STEPS):
        if best_res <= target:
            break
        # Newton-Kleinman step in defect-correction form: solving for the
        # small update keeps its rounding error relative to the update
        Acl = A - W @ best_pi
        if _abscissa(Acl) >= 0:
            break
        try:
            delta = solve_lyapunov(Acl, resid)
        except SingularSylvester:
            break
        Pi = best_pi + delta
        Pi = 0.5 * (Pi + Pi.T)
        new_resid = _residual_matrix(sys, Pi)
        res = float(np.linalg.norm(new_resid))
        if not res < best_res:
            break
        best_pi, best_res, resid = Pi, res, new_resid

    if not np.isfinite(best_res):
        raise NoConvergence("CARE solve produced non-finite values")
    K = RinvBT @ best_pi
    alpha = _abscissa(A - B @ K)
    if alpha >= 0:
        raise NotStabilizable(f"closed-loop abscissa {alpha:.3e} is not negative")
    if best_res > target:
        raise NoConvergence(f"residual {best_res:.3e} above target {target:.3e}")
    return RiccatiSolution(Pi=best_pi, K=K, residual=best_res, closed_loop_abscissa=alpha)
