"""Halton sampling, SDRE dataset generation, splitting and CSV persistence."""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    FormatError,
    InvalidBase,
    InvalidBounds,
    NoConvergence,
    NotStabilizable,
)
from .sdre import DEFAULT_TOL, sdre_solve

FORMAT_VERSION = 1


# -- Halton sequences ---------------------------------------------------------


def _is_prime(p):
    if p < 2:
        return False
    return all(p % d for d in range(2, int(math.isqrt(p)) + 1))


def first_primes(k):
    primes = []
    p = 2
    while len(primes) < k:
        if _is_prime(p):
            primes.append(p)
        p += 1
    return primes


def halton(index, base):
    """Radical inverse of ``index`` in ``base``.

    The digits are reversed into an integer numerator and divided once by
    ``base**ndigits``, so the result is the correctly rounded value.
    """
    if not isinstance(base, (int, np.integer)) or not _is_prime(int(base)):
        raise InvalidBase(f"base must be a prime integer, got {base!r}")
    if index < 1:
        raise ValueError("index must be >= 1")
    num, den = 0, 1
    i = int(index)
    while i:
        i, d = divmod(i, base)
        num = num * base + d
        den *= base
    return num / den


def _radical_inverse_array(indices, base):
    # vectorized twin of halton(); numerators and denominators stay exact in
    # int64 for every index this package generates
    i = np.array(indices, dtype=np.int64)
    num = np.zeros_like(i)
    den = np.ones_like(i)
    while np.any(i):
        live = i > 0
        d = i % base
        num = np.where(live, num * base + d, num)
        den = np.where(live, den * base, den)
        i //= base
    return num / den


@dataclass
class HaltonSampler:
    dim: int
    start_index: int = 1
    bases: list = field(default=None)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.start_index < 1:
            raise ValueError("start_index must be >= 1")
        if self.bases is None:
            self.bases = first_primes(self.dim)
        self.bases = [int(b) for b in self.bases]
        if len(self.bases) != self.dim or any(not _is_prime(b) for b in self.bases):
            raise InvalidBase("need one prime base per dimension")
        if any(b >= c for b, c in zip(self.bases, self.bases[1:])):
            raise InvalidBase("bases must be distinct and increasing")

    def points(self, count, offset=0):
        """``count`` points of the unit cube, starting at ``start_index + offset``."""
        idx = np.arange(count, dtype=np.int64) + self.start_index + offset
        out = np.empty((count, self.dim))
        for k, b in enumerate(self.bases):
            out[:, k] = _radical_inverse_array(idx, b)
        return out


def sample_states(sampler, N_s, lower, upper):
    """Affine image of the first ``N_s`` sampler points in the box [lower, upper]."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (sampler.dim,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (sampler.dim,))
    if np.any(~(lower < upper)):
        raise InvalidBounds("lower must be strictly below upper componentwise")
    if N_s < 0:
        raise ValueError("N_s must be non-negative")
    return lower + (upper - lower) * sampler.points(N_s)


# -- datasets -----------------------------------------------------------------


def _as_rows(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


@dataclass
class Dataset:
    """SDRE samples stored column-wise: states, controls, values, gradients."""

    X: np.ndarray
    U: np.ndarray
    V: np.ndarray
    G: np.ndarray
    system_name: str = "custom"
    lower: np.ndarray = None
    upper: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = _as_rows(self.X)
        N, n = self.X.shape
        self.U = _as_rows(self.U)
        self.V = np.asarray(self.V, dtype=float).reshape(N)
        self.G = np.asarray(self.G, dtype=float).reshape(N, n)
        if len(self.U) != N:
            raise DimensionMismatch(f"{len(self.U)} controls for {N} states")
        if self.lower is not None:
            self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        if self.upper is not None:
            self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()

    @classmethod
    def empty(cls, n, m, **kw):
        return cls(np.zeros((0, n)), np.zeros((0, m)), np.zeros(0), np.zeros((0, n)), **kw)

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def m(self):
        return self.U.shape[1]

    def __len__(self):
        return len(self.X)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.X[idx], self.U[idx], self.V[idx], self.G[idx],
            system_name=self.system_name, lower=self.lower, upper=self.upper,
            meta=dict(self.meta),
        )

    def records(self):
        for i in range(len(self)):
            yield {"x": self.X[i], "u": self.U[i], "V": self.V[i], "gradV": self.G[i]}


def _solve_or_none(sys, x, tol):
    try:
        return sdre_solve(sys, x, tol)
    except NotStabilizable:
        return "not_stabilizable"
    except NoConvergence:
        return "no_convergence"


def generate(sys, states, tol=DEFAULT_TOL, threads=1):
    """Solve the SDRE at every state; failing states are dropped and tallied.

    Record order follows ``states`` regardless of ``threads``.
    """
    states = np.asarray(states, dtype=float).reshape(-1, sys.n)
    if threads > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda x: _solve_or_none(sys, x, tol), states))
    else:
        results = [_solve_or_none(sys, x, tol) for x in states]

    kept = [r for r in results if not isinstance(r, str)]
    discards = {
        "not_stabilizable": sum(r == "not_stabilizable" for r in results),
        "no_convergence": sum(r == "no_convergence" for r in results),
    }
    meta = {
        "tolerance": tol,
        "requested": len(states),
        "discarded": discards["not_stabilizable"] + discards["no_convergence"],
        "discard_reasons": discards,
        "system_params": _jsonable(sys.params),
    }
    if not kept:
        return Dataset.empty(sys.n, sys.m, system_name=sys.name,
                             lower=sys.domain_lower, upper=sys.domain_upper, meta=meta)
    return Dataset(
        X=np.array([r.x for r in kept]),
        U=np.array([r.u for r in kept]),
        V=np.array([r.V for r in kept]),
        G=np.array([r.gradV for r in kept]),
        system_name=sys.name,
        lower=sys.domain_lower,
        upper=sys.domain_upper,
        meta=meta,
    )


def split(ds, train_fraction=0.8, shuffle_seed=0):
    """Seeded shuffle, then the first ceil(f N) records train and the rest validate."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    N = len(ds)
    if N == 0:
        raise EmptyDataset("cannot split an empty dataset")
    perm = np.random.default_rng(shuffle_seed).permutation(N)
    n_train = math.ceil(train_fraction * N)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])


def consistency_error(ds, sys):
    """Max violation of u = -1/2 R^{-1} B(x)^T gradV over the records."""
    worst = 0.0
    for x, u, g in zip(ds.X, ds.U, ds.G):
        u_from_g = -0.5 * np.linalg.solve(sys.R, sys.B(x).T @ g)
        worst = max(worst, float(np.abs(u - u_from_g).max() / max(1.0, np.abs(u).max())))
    return worst


# -- persistence --------------------------------------------------------------


def _fmt(v):
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def header(n, m):
    return (
        [f"x_{i + 1}" for i in range(n)]
        + [f"u_{j + 1}" for j in range(m)]
        + ["V"]
        + [f"dV_{i + 1}" for i in range(n)]
    )


def default_manifest_path(path):
    return Path(path).with_suffix(".json")


def save(ds, path, manifest_path=None):
    """Write the CSV (17 significant digits) and its JSON manifest."""
    path = Path(path)
    manifest_path = Path(manifest_path) if manifest_path else default_manifest_path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header(ds.n, ds.m))
        for x, u, v, g in zip(ds.X, ds.U, ds.V, ds.G):
            w.writerow([_fmt(t) for t in x] + [_fmt(t) for t in u] + [_fmt(v)] + [_fmt(t) for t in g])
    manifest = {
        "format_version": FORMAT_VERSION,
        "system": ds.system_name,
        "n": ds.n,
        "m": ds.m,
        "count": len(ds),
        "lower": None if ds.lower is None else [float(v) for v in ds.lower],
        "upper": None if ds.upper is None else [float(v) for v in ds.upper],
        "meta": _jsonable(ds.meta),
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, manifest_path


def load(path, manifest_path=None, system=None, atol=1e-10):
    """Read a dataset written by :func:`save`.

    When ``system`` is given every record is re-checked against
    u = -1/2 R^{-1} B^T gradV; a violation raises FormatError.
    """
    path = Path(path)
    manifest_path = Path(manifest_path) if manifest_path else default_manifest_path(path)
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        n, m = int(manifest["n"]), int(manifest["m"])
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"bad manifest {manifest_path}: {exc}") from None
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header(n, m):
        raise FormatError(f"{path}: header does not match n={n}, m={m}")
    width = 2 * n + m + 1
    data = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:]):
        if len(row) != width:
            raise FormatError(f"{path}: row {i + 1} has {len(row)} columns, expected {width}")
        try:
            data[i] = [float(v) for v in row]
        except ValueError as exc:
            raise FormatError(f"{path}: row {i + 1}: {exc}") from None
    if "count" in manifest and manifest["count"] != len(data):
        raise FormatError(f"{path}: manifest count {manifest['count']} != {len(data)} rows")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite entries")
    ds = Dataset(
        X=data[:, :n],
        U=data[:, n:n + m],
        V=data[:, n + m],
        G=data[:, n + m + 1:],
        system_name=manifest.get("system", "custom"),
        lower=manifest.get("lower"),
        upper=manifest.get("upper"),
        meta=manifest.get("meta", {}),
    )
    if system is not None:
        err = consistency_error(ds, system)
        if err > atol:
            raise FormatError(f"{path}: records violate u = -R^-1 B^T gradV / 2 (err {err:.2e})")
    return ds
