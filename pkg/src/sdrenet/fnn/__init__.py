"""Feedforward networks, gradient-augmented losses and L-BFGS training."""

from .checkpoint import load_checkpoint, save_checkpoint
from .losses import (
    LOSS_MODES,
    LossWeights,
    grad_aug_loss,
    loss_and_gradient,
    loss_param_gradient,
    mse_loss,
    r_squared,
)
from .network import (
    Architecture,
    NetworkParams,
    feedback_from_value,
    forward,
    init_params,
    input_gradient,
)
from .training import fit_report, train

__all__ = [
    "Architecture",
    "LOSS_MODES",
    "LossWeights",
    "NetworkParams",
    "feedback_from_value",
    "fit_report",
    "forward",
    "grad_aug_loss",
    "init_params",
    "input_gradient",
    "load_checkpoint",
    "loss_and_gradient",
    "loss_param_gradient",
    "mse_loss",
    "r_squared",
    "save_checkpoint",
    "train",
]
