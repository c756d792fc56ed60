"""Dense feedforward networks with exact input and parameter derivatives.

Layers are ``h_m = sigma(W_m h_{m-1} + b_m)`` with a linear output layer.  All
routines accept a single input vector or a batch of row vectors.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch

ACTIVATIONS = ("relu", "tanh")


@dataclass
class Architecture:
    layer_sizes: list
    activations: list

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if isinstance(self.activations, str):
            self.activations = [self.activations] * (len(self.layer_sizes) - 2)
        self.activations = list(self.activations)
        if len(self.layer_sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if len(self.activations) != len(self.layer_sizes) - 2:
            raise ValueError("one activation per hidden layer")
        bad = set(self.activations) - set(ACTIVATIONS)
        if bad:
            raise ValueError(f"unknown activations {sorted(bad)}")

    @classmethod
    def uniform(cls, n_in, hidden, width, n_out, activation):
        return cls([n_in] + [width] * hidden + [n_out], [activation] * hidden)


@dataclass
class NetworkParams:
    weights: list
    biases: list
    activations: list

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def architecture(self):
        return Architecture(self.layer_sizes, self.activations)

    @property
    def n_in(self):
        return self.weights[0].shape[1]

    @property
    def n_out(self):
        return self.weights[-1].shape[0]

    @property
    def size(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def flat(self):
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def with_flat(self, theta):
        """New params whose arrays are views into ``theta`` (no copy)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise DimensionMismatch(f"expected {self.size} parameters, got {theta.shape}")
        weights, biases, k = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(theta[k:k + W.size].reshape(W.shape))
            k += W.size
            biases.append(theta[k:k + b.size])
            k += b.size
        return NetworkParams(weights, biases, list(self.activations))

    def copy(self):
        return self.with_flat(self.flat().copy())

    def zeros_like(self):
        return self.with_flat(np.zeros(self.size))


def init_params(arch, seed=0):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, list(arch.activations))


def _act(kind, z):
    """Return sigma(z) and sigma'(z)."""
    if kind == "tanh":
        t = np.tanh(z)
        return t, 1.0 - t * t
    h = np.maximum(z, 0.0)
    return h, (z > 0).astype(float)


def _second(kind, h, s):
    """sigma''(z) from the cached sigma(z), sigma'(z); relu gives None (zero a.e.)."""
    if kind == "tanh":
        return -2.0 * h * s
    return None


def _as_batch(params, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.n_in:
        raise DimensionMismatch(f"input must have {params.n_in} features, got shape {x.shape}")
    return X, single


def _forward_cache(params, X):
    Hs, Ss = [X], []
    h = X
    for W, b, kind in zip(params.weights[:-1], params.biases[:-1], params.activations):
        h, s = _act(kind, h @ W.T + b)
        Hs.append(h)
        Ss.append(s)
    out = h @ params.weights[-1].T + params.biases[-1]
    return Hs, Ss, out


def forward(params, x):
    """Network output for one input (vector) or a batch (rows)."""
    X, single = _as_batch(params, x)
    out = _forward_cache(params, X)[2]
    return out[0] if single else out


def _input_sweep(params, Ss, seed):
    """Reverse sweep from output adjoint ``seed`` (rows) to the input.

    Returns the input adjoint and the per-layer intermediates a_m, d_m needed to
    differentiate the sweep itself.
    """
    a = seed
    As, Ds = [None] * len(Ss), [None] * len(Ss)
    for m in range(len(Ss) - 1, -1, -1):
        As[m] = a
        d = a * Ss[m]
        Ds[m] = d
        a = d @ params.weights[m]
    return a, As, Ds


def input_gradient(params, x):
    """Exact d output / d input.

    Scalar-output networks give a gradient vector per input (rows for a
    batch); vector-output networks give an ``n_out x n_in`` Jacobian for a
    single input.
    """
    X, single = _as_batch(params, x)
    Hs, Ss, _ = _forward_cache(params, X)
    W_out = params.weights[-1]
    if params.n_out == 1:
        seed = np.broadcast_to(W_out, (len(X), W_out.shape[1]))
        g = _input_sweep(params, Ss, seed)[0]
        return g[0] if single else g
    if not single:
        raise DimensionMismatch("Jacobians of vector-output networks are per single input")
    jac = np.empty((params.n_out, params.n_in))
    for k in range(params.n_out):
        jac[k] = _input_sweep(params, Ss, W_out[k:k + 1])[0][0]
    return jac


def feedback_from_value(params, B, R, x):
    """u_V(x) = -1/2 R^{-1} B^T grad V_theta(x)."""
    if params.n_out != 1:
        raise DimensionMismatch("feedback_from_value needs a scalar-output network")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if B.shape[0] != params.n_in or R.shape != (B.shape[1], B.shape[1]):
        raise DimensionMismatch("B must be n_in x m and R m x m")
    g = input_gradient(params, x)
    return -0.5 * np.linalg.solve(R, B.T @ g.T).T


def _backprop(params, Hs, Ss, out_adj, z_extra=None):
    """Parameter gradient from an output adjoint, plus optional direct
    adjoints on the hidden pre-activations."""
    L = len(params.weights)
    gW, gb = [None] * L, [None] * L
    gW[-1] = out_adj.T @ Hs[-1]
    gb[-1] = out_adj.sum(axis=0)
    hbar = out_adj @ params.weights[-1]
    for m in range(L - 2, -1, -1):
        zbar = hbar * Ss[m]
        if z_extra is not None and z_extra[m] is not None:
            zbar = zbar + z_extra[m]
        gW[m] = zbar.T @ Hs[m]
        gb[m] = zbar.sum(axis=0)
        if m:
            hbar = zbar @ params.weights[m]
    return gW, gb


def _pack(params, gW, gb):
    return NetworkParams(gW, gb, list(params.activations))


def mse_value_and_grad(params, X, Y, scale=1.0):
    """``scale * mean_i |f(x_i) - y_i|^2`` and its parameter gradient."""
    Hs, Ss, out = _forward_cache(params, X)
    Y = np.asarray(Y, dtype=float).reshape(out.shape)
    r = out - Y
    N = len(X)
    loss = scale * float(np.sum(r * r)) / N
    gW, gb = _backprop(params, Hs, Ss, (2.0 * scale / N) * r)
    return loss, _pack(params, gW, gb)


def grad_aug_value_and_grad(params, X, V, G, mu_V, mu_dV):
    """Gradient-augmented loss mu_V MSE(V) + mu_dV MSE(grad V) and its exact
    parameter gradient, differentiating through the input-gradient sweep."""
    if params.n_out != 1:
        raise DimensionMismatch("gradient-augmented loss needs a scalar-output network")
    if mu_dV == 0:
        return mse_value_and_grad(params, X, V, scale=mu_V)
    N = len(X)
    Hs, Ss, out = _forward_cache(params, X)
    G = np.asarray(G, dtype=float).reshape(N, params.n_in)
    rV = out[:, 0] - np.asarray(V, dtype=float).reshape(N)
    W_out = params.weights[-1]
    seed = np.broadcast_to(W_out, (N, W_out.shape[1]))
    grad_x, As, Ds = _input_sweep(params, Ss, seed)
    rG = grad_x - G
    loss = mu_V * float(rV @ rV) / N + mu_dV * float(np.sum(rG * rG)) / N

    # reverse through the input sweep, from the input back to the output seed
    L = len(params.weights)
    gW_sweep = [None] * L
    z_extra = [None] * (L - 1)
    abar = (2.0 * mu_dV / N) * rG
    for m in range(L - 1):
        gW_sweep[m] = Ds[m].T @ abar
        dbar = abar @ params.weights[m].T
        abar = dbar * Ss[m]
        sec = _second(params.activations[m], Hs[m + 1], Ss[m])
        if sec is not None:
            z_extra[m] = dbar * As[m] * sec
    gW_sweep[-1] = abar.sum(axis=0, keepdims=True)

    out_adj = ((2.0 * mu_V / N) * rV)[:, None]
    gW, gb = _backprop(params, Hs, Ss, out_adj, z_extra)
    gW = [w + s for w, s in zip(gW, gW_sweep)]
    return loss, _pack(params, gW, gb)
