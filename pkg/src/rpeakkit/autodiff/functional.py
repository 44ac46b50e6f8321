"""Differentiable primitives used by the U-Net.

All sequence tensors are laid out as ``(batch, channels, length)``. Every
primitive records its own adjoint; there is no generic elementwise machinery
because the model only needs this closed set.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InputError, ShapeError
from .tensor import DTYPE, Tensor, make_result

Padding = Union[int, Tuple[int, int]]


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel, self.stride) < 1:
            raise ShapeError(f"invalid conv spec {self}")
        if self.padding < 0:
            raise ShapeError(f"negative padding in {self}")

    def out_length(self, length: int) -> int:
        return conv_out_length(length, self.kernel, self.stride, self.padding)

    def transpose_out_length(self, length: int, output_padding: int = 0) -> int:
        return (length - 1) * self.stride - 2 * self.padding + self.kernel + output_padding


def conv_out_length(length: int, kernel: int, stride: int, padding: Padding) -> int:
    left, right = _pads(padding)
    return (length + left + right - kernel) // stride + 1


def _pads(padding: Padding) -> Tuple[int, int]:
    if isinstance(padding, (tuple, list)):
        return int(padding[0]), int(padding[1])
    return int(padding), int(padding)


def _windows(xp: np.ndarray, kernel: int, stride: int, n_out: int) -> np.ndarray:
    # (B, C, Lp) -> read-only view (B, C, n_out, kernel)
    view = sliding_window_view(xp, kernel, axis=2)
    return view[:, :, ::stride][:, :, :n_out]


def _col2im(cols: np.ndarray, length: int, stride: int) -> np.ndarray:
    # Adjoint of _windows: cols (B, n, C, k) scattered into (B, C, length).
    batch, n, channels, kernel = cols.shape
    out = np.zeros((batch, channels, length), dtype=DTYPE)
    span = stride * (n - 1) + 1
    for j in range(kernel):
        out[:, :, j : j + span : stride] += cols[:, :, :, j].transpose(0, 2, 1)
    return out


def _check_3d(x: Tensor, what: str) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{what} expects (batch, channels, length), got {x.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return make_result(a.data + b.data, (a, b), backward)


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: Padding = 0,
) -> Tensor:
    """Cross-correlation with zero padding; ``weight`` is ``(out, in, kernel)``."""
    _check_3d(x, "conv1d")
    batch, channels, length = x.shape
    out_ch, in_ch, kernel = weight.shape
    if channels != in_ch:
        raise ShapeError(f"conv1d expects {in_ch} input channels, got {channels}")
    left, right = _pads(padding)
    padded_len = length + left + right
    if padded_len < kernel:
        raise ShapeError(f"padded length {padded_len} shorter than kernel {kernel}")
    n_out = (padded_len - kernel) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
    win = _windows(xp, kernel, stride, n_out)
    out = np.tensordot(win, weight.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    def backward(g):
        if weight.requires_grad:
            weight._accumulate(np.tensordot(g, win, axes=([0, 2], [0, 2])))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            cols = np.tensordot(g, weight.data, axes=([1], [0]))
            gxp = _col2im(cols, padded_len, stride)
            x._accumulate(gxp[:, :, left : left + length])

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward)


def conv_transpose1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Adjoint of :func:`conv1d`; ``weight`` is ``(in, out, kernel)``."""
    _check_3d(x, "conv_transpose1d")
    batch, channels, length = x.shape
    in_ch, out_ch, kernel = weight.shape
    if channels != in_ch:
        raise ShapeError(f"conv_transpose1d expects {in_ch} input channels, got {channels}")
    full_len = (length - 1) * stride + kernel
    n_out = full_len - 2 * padding + output_padding
    if n_out < 1:
        raise ShapeError(f"transpose conv output length {n_out} < 1")

    cols = np.tensordot(x.data, weight.data, axes=([1], [0]))  # (B, L, Cout, k)
    full = _col2im(cols, full_len + output_padding, stride)
    out = full[:, :, padding : padding + n_out]
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    def backward(g):
        gfull = np.zeros((batch, out_ch, full_len + output_padding), dtype=DTYPE)
        gfull[:, :, padding : padding + n_out] = g
        win = _windows(gfull, kernel, stride, length)  # (B, Cout, L, k)
        if weight.requires_grad:
            weight._accumulate(np.tensordot(x.data, win, axes=([0, 2], [0, 2])))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gx = np.tensordot(win, weight.data, axes=([1, 3], [1, 2]))
            x._accumulate(gx.transpose(0, 2, 1))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization.

    In training mode the batch statistics are used and the running buffers
    are updated in place (unbiased variance, PyTorch convention).
    """
    _check_3d(x, "batch_norm")
    batch, channels, length = x.shape
    if training:
        n = batch * length
        if n <= 1:
            raise InputError("batch_norm in train mode needs more than one value per channel")
        mean = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * n / (n - 1)
    else:
        n = None
        mean, var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None]) * inv_std[None, :, None]
    out = gamma.data[None, :, None] * xhat + beta.data[None, :, None]

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=(0, 2)))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gxhat = g * gamma.data[None, :, None]
            if training:
                s1 = gxhat.sum(axis=(0, 2))[None, :, None]
                s2 = (gxhat * xhat).sum(axis=(0, 2))[None, :, None]
                gx = (gxhat - s1 / n - xhat * s2 / n) * inv_std[None, :, None]
            else:
                gx = gxhat * inv_std[None, :, None]
            x._accumulate(gx)

    return make_result(out, (x, gamma, beta), backward)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    positive = x.data >= 0
    out = np.where(positive, x.data, slope * x.data)

    def backward(g):
        x._accumulate(np.where(positive, g, slope * g))

    return make_result(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward(g):
        x._accumulate(g * out * (1.0 - out))

    return make_result(out, (x,), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    _check_3d(a, "concat_channels")
    _check_3d(b, "concat_channels")
    if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    split = a.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:, :split])
        if b.requires_grad:
            b._accumulate(g[:, split:])

    return make_result(out, (a, b), backward)


def smooth_l1_elementwise(diff: np.ndarray) -> np.ndarray:
    absd = np.abs(diff)
    return np.where(absd < 1.0, 0.5 * diff * diff, absd - 0.5)


def smooth_l1(pred: Tensor, target) -> Tensor:
    """Mean SmoothL1 of ``target - pred`` (quadratic below |1|, linear above)."""
    if not isinstance(target, Tensor):
        target = Tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"smooth_l1 shape mismatch {pred.shape} vs {target.shape}")
    diff = target.data - pred.data
    n = diff.size
    out = np.asarray(smooth_l1_elementwise(diff).sum() / n)

    def backward(g):
        slope = np.where(np.abs(diff) < 1.0, diff, np.sign(diff)) * (float(g) / n)
        if pred.requires_grad:
            pred._accumulate(-slope)
        if target.requires_grad:
            target._accumulate(slope)

    return make_result(out, (pred, target), backward)
