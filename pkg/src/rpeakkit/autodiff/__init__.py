"""Minimal reverse-mode differentiation over numpy arrays."""
from .functional import (
    ConvSpec,
    add,
    batch_norm,
    concat_channels,
    conv1d,
    conv_out_length,
    conv_transpose1d,
    leaky_relu,
    sigmoid,
    smooth_l1,
)
from .optim import AdamState, adam_step, lr_at
from .tensor import Tensor, parameter

__all__ = [
    "AdamState",
    "ConvSpec",
    "Tensor",
    "adam_step",
    "add",
    "batch_norm",
    "concat_channels",
    "conv1d",
    "conv_out_length",
    "conv_transpose1d",
    "leaky_relu",
    "lr_at",
    "parameter",
    "sigmoid",
    "smooth_l1",
]
