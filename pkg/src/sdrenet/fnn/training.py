"""Mini-batch L-BFGS training with best-validation snapshotting."""

import logging
import math

import numpy as np

from ..errors import DegenerateTargets, EmptyDataset, NonFiniteLoss
from . import lbfgs
from .losses import LOSS_MODES, LossWeights, loss_and_gradient, mse_loss, r_squared
from .network import feedback_from_value, forward, input_gradient

log = logging.getLogger(__name__)


def _safe_r2(preds, targets):
    try:
        return r_squared(preds, targets)
    except DegenerateTargets:
        return math.nan


def fit_report(params, ds, mode, B=None, R=None):
    """r^2 and MSE of every predicted variable on ``ds``.

    Value networks report V, grad V and (given B, R) the induced feedback u_V;
    direct networks report u_theta.
    """
    if mode == "direct":
        pred = forward(params, ds.X)
        return {"u_theta": {"r2": _safe_r2(pred, ds.U), "mse": mse_loss(pred, ds.U)}}
    V = forward(params, ds.X)[:, 0]
    G = input_gradient(params, ds.X)
    report = {
        "V": {"r2": _safe_r2(V, ds.V), "mse": mse_loss(V, ds.V)},
        "dV": {"r2": _safe_r2(G, ds.G), "mse": mse_loss(G, ds.G)},
    }
    if B is not None and R is not None:
        U = feedback_from_value(params, B, R, ds.X)
        report["u_V"] = {"r2": _safe_r2(U, ds.U), "mse": mse_loss(U, ds.U)}
    return report


def selection_key(mode, weights, feedback):
    if mode == "direct":
        return "u_theta"
    if feedback is not None:
        return "u_V"
    return "dV" if weights.mu_dV > 0 else "V"


def train(
    params,
    train_set,
    val_set,
    loss_mode="value",
    weights=None,
    epochs=10,
    batch_size=100,
    lbfgs_memory=10,
    seed=0,
    iters_per_batch=10,
    full_batch=False,
    feedback=None,
):
    """Fit ``params`` and return the best-validation snapshot and the history.

    Each epoch visits the training set in seeded random mini-batches; L-BFGS
    curvature pairs are discarded at every batch boundary (only the scalar
    initial-Hessian scale carries over).  ``full_batch=True`` uses the whole
    training set as one batch.  ``feedback=(B, R)`` makes a value network
    select on the r^2 of its induced feedback.
    """
    if loss_mode not in LOSS_MODES:
        raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
    if len(train_set) == 0:
        raise EmptyDataset("empty training set")
    weights = weights or LossWeights()
    B, R = feedback if feedback is not None else (None, None)
    key = selection_key(loss_mode, weights, feedback)
    rng = np.random.default_rng(seed)
    theta = params.flat().copy()
    gamma = None
    N = len(train_set)
    bs = N if full_batch else max(1, int(batch_size))

    def objective(batch):
        def fun(th):
            loss, grad = loss_and_gradient(params.with_flat(th), batch, loss_mode, weights)
            return loss, grad.flat()
        return fun

    history = []
    best, best_score = theta.copy(), -math.inf
    for epoch in range(1, epochs + 1):
        order = rng.permutation(N)
        for start in range(0, N, bs):
            batch = train_set.subset(order[start:start + bs])
            res = lbfgs.minimize(objective(batch), theta, max_iter=iters_per_batch,
                                 memory=lbfgs_memory, gamma=gamma)
            theta, gamma = res.x, res.gamma

        current = params.with_flat(theta)
        train_loss = loss_and_gradient(current, train_set, loss_mode, weights)[0]
        if not math.isfinite(train_loss):
            raise NonFiniteLoss(f"training loss is {train_loss} at epoch {epoch}", epoch=epoch)
        row = {"epoch": epoch, "train_loss": train_loss}
        if len(val_set):
            row["val_loss"] = loss_and_gradient(current, val_set, loss_mode, weights)[0]
            for name, stats in fit_report(current, val_set, loss_mode, B, R).items():
                row[f"val_r2_{name}"] = stats["r2"]
                row[f"val_mse_{name}"] = stats["mse"]
            row["val_r2"] = row[f"val_r2_{key}"]
        else:
            row["val_loss"] = math.nan
            row["val_r2"] = math.nan
        history.append(row)
        log.info("epoch %d train %.4e val %.4e r2 %.5f", epoch, train_loss, row["val_loss"], row["val_r2"])

        # prefer r^2; fall back to the (negated) loss when r^2 is undefined
        score = row["val_r2"]
        if math.isnan(score):
            score = -(row["val_loss"] if math.isfinite(row["val_loss"]) else train_loss)
        if score > best_score:
            best_score, best = score, theta.copy()

    return params.with_flat(best), history
