"""Benchmark control-affine systems written in semilinear form.

Every model is a :class:`SemilinearSystem`: a drift factorization
``f(x) = A(x) x``, an input matrix ``B(x)``, quadratic cost weights and a
sampling box.  Evaluators are plain bound methods, so systems pickle and can be
shipped to worker processes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidConfig

NONLINEARITIES = ("bistable", "printed")


@dataclass
class SemilinearSystem:
    n: int
    m: int
    eval_A: object
    eval_B: object
    Q: np.ndarray
    R: np.ndarray
    domain_lower: np.ndarray
    domain_upper: np.ndarray
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.domain_lower = np.broadcast_to(
            np.asarray(self.domain_lower, dtype=float), (self.n,)
        ).copy()
        self.domain_upper = np.broadcast_to(
            np.asarray(self.domain_upper, dtype=float), (self.n,)
        ).copy()
        if self.Q.shape != (self.n, self.n) or self.R.shape != (self.m, self.m):
            raise DimensionMismatch("cost weights do not match (n, m)")
        if np.any(self.domain_lower >= self.domain_upper):
            raise InvalidConfig("domain_lower must be below domain_upper componentwise")

    def A(self, x):
        return self.eval_A(self._check(x))

    def B(self, x):
        return self.eval_B(self._check(x))

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"{self.name}: expected state of length {self.n}, got {x.shape}")
        return x


def drift(sys, x):
    """Free dynamics ``f(x) = A(x) x``."""
    x = np.asarray(x, dtype=float)
    return sys.A(x) @ x


def interaction_kernel(y_i, y_j):
    """Cucker-Smale communication weight ``1 / (1 + |y_i - y_j|^2)``."""
    y_i = np.atleast_1d(np.asarray(y_i, dtype=float))
    y_j = np.atleast_1d(np.asarray(y_j, dtype=float))
    if y_i.shape != y_j.shape:
        raise DimensionMismatch(f"position shapes differ: {y_i.shape} vs {y_j.shape}")
    d = y_i - y_j
    return 1.0 / (1.0 + float(d @ d))


# -- Cucker-Smale consensus --------------------------------------------------


@dataclass
class CuckerSmaleConfig:
    N_a: int = 20
    box_half_width: float = 3.0

    def validate(self):
        if int(self.N_a) != self.N_a or self.N_a < 2:
            raise InvalidConfig(f"N_a must be an integer >= 2, got {self.N_a}")
        if not self.box_half_width > 0:
            raise InvalidConfig("box_half_width must be positive")


class _CuckerSmale:
    def __init__(self, N_a):
        self.N_a = N_a
        self._B = np.vstack([np.zeros((N_a, N_a)), np.eye(N_a)])

    def consensus_matrix(self, y):
        """Velocity coupling matrix; rows sum to zero."""
        diff = y[:, None] - y[None, :]
        P = 1.0 / (1.0 + diff * diff)
        C = P / self.N_a
        # diagonal: own term P_ii/N_a minus the full row sum, i.e. the k != i sum
        C[np.diag_indices_from(C)] -= C.sum(axis=1)
        return C

    def eval_A(self, x):
        N = self.N_a
        A = np.zeros((2 * N, 2 * N))
        A[:N, N:] = np.eye(N)
        A[N:, N:] = self.consensus_matrix(x[:N])
        return A

    def eval_B(self, x):
        return self._B.copy()


def cucker_smale_system(cfg=None):
    cfg = cfg or CuckerSmaleConfig()
    cfg.validate()
    N = int(cfg.N_a)
    model = _CuckerSmale(N)
    w = float(cfg.box_half_width)
    return SemilinearSystem(
        n=2 * N,
        m=N,
        eval_A=model.eval_A,
        eval_B=model.eval_B,
        Q=np.eye(2 * N) / N,
        R=np.eye(N),
        domain_lower=-w,
        domain_upper=w,
        name="cucker_smale",
        params={"N_a": N, "box_half_width": w},
    )


# -- Allen-Cahn ---------------------------------------------------------------


@dataclass
class AllenCahnConfig:
    N: int = 51
    diffusion: float = 0.1
    omega_lo: float = 0.6
    omega_hi: float = 0.9
    control_weight: float = 0.1
    box_half_width: float = 2.0
    nonlinearity: str = "bistable"

    def validate(self):
        if int(self.N) != self.N or self.N < 3:
            raise InvalidConfig(f"N must be an integer >= 3, got {self.N}")
        if not self.diffusion > 0:
            raise InvalidConfig("diffusion must be positive")
        if not 0 <= self.omega_lo < self.omega_hi <= 1:
            raise InvalidConfig("need 0 <= omega_lo < omega_hi <= 1")
        if not self.control_weight > 0:
            raise InvalidConfig("control_weight must be positive")
        if not self.box_half_width > 0:
            raise InvalidConfig("box_half_width must be positive")
        if self.nonlinearity not in NONLINEARITIES:
            raise InvalidConfig(f"nonlinearity must be one of {NONLINEARITIES}")


def neumann_laplacian(N):
    """Second-difference matrix on N uniform points of [0, 1], reflecting ends."""
    h = 1.0 / (N - 1)
    L = np.zeros((N, N))
    i = np.arange(1, N - 1)
    L[i, i - 1] = 1.0
    L[i, i] = -2.0
    L[i, i + 1] = 1.0
    # ghost point x_{-1} = x_1 and x_N = x_{N-2}
    L[0, 0], L[0, 1] = -2.0, 2.0
    L[N - 1, N - 1], L[N - 1, N - 2] = -2.0, 2.0
    return L / (h * h)


def grid(N):
    return np.arange(N) / (N - 1)


class _AllenCahn:
    def __init__(self, cfg):
        self.linear = cfg.diffusion * neumann_laplacian(cfg.N)
        # bistable: x(1 - x^2); printed: x(1 + x^2)
        self.sign = -1.0 if cfg.nonlinearity == "bistable" else 1.0
        xi = grid(cfg.N)
        chi = ((xi >= cfg.omega_lo) & (xi <= cfg.omega_hi)).astype(float)
        self._B = chi[:, None]

    def eval_A(self, x):
        A = self.linear.copy()
        A[np.diag_indices_from(A)] += 1.0 + self.sign * x * x
        return A

    def eval_B(self, x):
        return self._B.copy()


def allen_cahn_system(cfg=None):
    cfg = cfg or AllenCahnConfig()
    cfg.validate()
    N = int(cfg.N)
    model = _AllenCahn(cfg)
    w = float(cfg.box_half_width)
    h = 1.0 / (N - 1)
    return SemilinearSystem(
        n=N,
        m=1,
        eval_A=model.eval_A,
        eval_B=model.eval_B,
        Q=h * np.eye(N),
        R=[[float(cfg.control_weight)]],
        domain_lower=-w,
        domain_upper=w,
        name="allen_cahn",
        params={
            "N": N,
            "diffusion": float(cfg.diffusion),
            "omega_lo": float(cfg.omega_lo),
            "omega_hi": float(cfg.omega_hi),
            "control_weight": float(cfg.control_weight),
            "box_half_width": w,
            "nonlinearity": cfg.nonlinearity,
        },
    )


# -- linear test systems ------------------------------------------------------


class _Constant:
    def __init__(self, M):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))

    def __call__(self, x):
        return self.M.copy()


def linear_system(A, B, Q, R, half_width=1.0, name="linear"):
    """Wrap a constant (A, B) pair as a semilinear system."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    return SemilinearSystem(
        n=n,
        m=m,
        eval_A=_Constant(A),
        eval_B=_Constant(B),
        Q=Q,
        R=R,
        domain_lower=-half_width,
        domain_upper=half_width,
        name=name,
        params={
            "A": A.tolist(),
            "B": B.tolist(),
            "Q": np.atleast_2d(np.asarray(Q, dtype=float)).tolist(),
            "R": np.atleast_2d(np.asarray(R, dtype=float)).tolist(),
            "half_width": half_width,
        },
    )


def make_system(name, **params):
    """Build a registered system from its name and keyword parameters."""
    if name == "cucker_smale":
        return cucker_smale_system(CuckerSmaleConfig(**params))
    if name == "allen_cahn":
        return allen_cahn_system(AllenCahnConfig(**params))
    if name == "linear":
        try:
            A = params["A"]
            B = params["B"]
        except KeyError as exc:
            raise InvalidConfig(f"linear system needs {exc}") from None
        n = np.atleast_2d(A).shape[0]
        B_arr = np.asarray(B, dtype=float).reshape(n, -1)
        Q = params.get("Q", np.eye(n))
        R = params.get("R", np.eye(B_arr.shape[1]))
        return linear_system(A, B_arr, Q, R, params.get("half_width", 1.0))
    raise InvalidConfig(f"unknown system {name!r}")
