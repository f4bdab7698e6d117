"""Minimal deterministic neural-network engine on float64 numpy arrays.

Tensors are plain ndarrays of shape (N, C, H, W) in C order (N-major).
Layers cache what their backward pass needs; gradients accumulate into
``grad_*`` attributes mirroring each parameter array.
"""

from .layers import DepthwiseConv3x3, Dropout, PointwiseConv, ReLU, dropout, relu
from .loss import mse_loss, mse_loss_backward
from .optim import AdamState, adam_step
from .gradcheck import grad_check

__all__ = [
    "DepthwiseConv3x3",
    "PointwiseConv",
    "ReLU",
    "Dropout",
    "relu",
    "dropout",
    "mse_loss",
    "mse_loss_backward",
    "AdamState",
    "adam_step",
    "grad_check",
]
