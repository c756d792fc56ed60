"""Losses and fit metrics for feedback and value networks."""

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTargets, DimensionMismatch, EmptyBatch
from .network import grad_aug_value_and_grad, mse_value_and_grad

LOSS_MODES = ("direct", "value")


@dataclass(frozen=True)
class LossWeights:
    mu_V: float = 1.0
    mu_dV: float = 1.0

    def __post_init__(self):
        if self.mu_V < 0 or self.mu_dV < 0:
            raise ValueError("loss weights must be non-negative")
        if self.mu_V == 0 and self.mu_dV == 0:
            raise ValueError("loss weights cannot both be zero")


def _pair(preds, targets):
    p = np.asarray(preds, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if t.ndim == 1:
        t = t[:, None]
    if p.shape != t.shape:
        raise DimensionMismatch(f"prediction shape {p.shape} != target shape {t.shape}")
    if len(p) == 0:
        raise EmptyBatch("no samples")
    return p, t


def mse_loss(preds, targets):
    """Mean over samples of the squared Euclidean error."""
    p, t = _pair(preds, targets)
    return float(np.sum((p - t) ** 2)) / len(p)


def r_squared(preds, targets):
    """Coefficient of determination with the componentwise target mean."""
    p, t = _pair(preds, targets)
    if len(p) < 2:
        raise DegenerateTargets("r^2 needs at least two samples")
    ss_tot = float(np.sum((t - t.mean(axis=0)) ** 2))
    if ss_tot == 0:
        raise DegenerateTargets("targets are all identical")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def grad_aug_loss(params, X, V, G, weights):
    return grad_aug_value_and_grad(params, np.atleast_2d(X), V, G, weights.mu_V, weights.mu_dV)[0]


def loss_and_gradient(params, batch, mode="value", weights=None):
    """Loss and exact parameter gradient on a dataset batch.

    ``mode="direct"`` fits the controls with plain MSE; ``mode="value"`` fits
    V and grad V with the gradient-augmented loss.
    """
    if mode == "direct":
        return mse_value_and_grad(params, batch.X, batch.U)
    if mode == "value":
        weights = weights or LossWeights()
        return grad_aug_value_and_grad(params, batch.X, batch.V, batch.G, weights.mu_V, weights.mu_dV)
    raise ValueError(f"unknown loss mode {mode!r}")


def loss_param_gradient(params, batch, weights=None, mode="value"):
    return loss_and_gradient(params, batch, mode, weights)[1]
