"""A small reverse-mode autodiff engine sized for the coarse network."""

from .checkpoint import load_checkpoint, save_checkpoint
from .ops import (
    add,
    concat_channels,
    conv2d,
    conv3d,
    conv3d_separable,
    l1_loss,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    reshape,
    scalar_mul,
    transpose,
)
from .optim import Adam, AdamState, adam_step, lr_schedule
from .tensor import Tensor, as_tensor, is_grad_enabled, no_grad

__all__ = [
    "Tensor",
    "as_tensor",
    "no_grad",
    "is_grad_enabled",
    "conv2d",
    "conv3d",
    "conv3d_separable",
    "pixel_shuffle",
    "pixel_unshuffle",
    "relu",
    "add",
    "scalar_mul",
    "concat_channels",
    "reshape",
    "transpose",
    "l1_loss",
    "Adam",
    "AdamState",
    "adam_step",
    "lr_schedule",
    "save_checkpoint",
    "load_checkpoint",
]
