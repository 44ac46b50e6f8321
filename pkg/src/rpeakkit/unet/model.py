"""1D Inception-Residual U-Net mapping an ECG window to a distance map."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor, parameter
from ..errors import ConfigError, ShapeError


@dataclass
class ModelConfig:
    input_length: int = 5000
    depth: int = 8
    base_channels: int = 16
    max_channels: int = 1024
    inception_kernels: Tuple[int, ...] = (15, 17, 19, 21)
    leaky_slope: float = 0.2
    down_kernel: int = 4
    down_stride: int = 2
    fuse_kernel: int = 3
    decoder_incres: bool = False
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        self.inception_kernels = tuple(int(k) for k in self.inception_kernels)
        n_branch = len(self.inception_kernels)
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if n_branch == 0:
            raise ConfigError("at least one inception kernel is required")
        if self.base_channels < 4 or self.base_channels % n_branch:
            raise ConfigError(
                f"base_channels must be >= 4 and divisible by {n_branch} branches, "
                f"got {self.base_channels}")
        if self.max_channels < self.base_channels or self.max_channels % n_branch:
            raise ConfigError("max_channels must be >= base_channels and divisible by branch count")
        if any(k % 2 == 0 or k < 1 for k in self.inception_kernels):
            raise ConfigError(f"inception kernels must be odd, got {self.inception_kernels}")
        if self.input_length < 2:
            raise ConfigError("input_length must be >= 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inception_kernels"] = list(self.inception_kernels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def channels_at(config: ModelConfig, stage: int) -> int:
    """Encoder width at ``stage``: doubling from ``base_channels``, capped at ``max_channels``."""
    if not 0 <= stage < config.depth:
        raise ConfigError(f"stage {stage} outside [0, {config.depth})")
    return min(config.base_channels * 2 ** stage, config.max_channels)


def length_trace(config: ModelConfig) -> List[Tuple[int, bool, int]]:
    """Per encoder stage: (input length, needs odd-length adjuster, output length)."""
    trace, length = [], config.input_length
    k, s = config.down_kernel, config.down_stride
    for stage in range(config.depth):
        odd = length % 2 == 1
        cur = length - 1 if odd else length
        out = F.conv_out_length(cur, k, s, (k - s) // 2)
        if cur < 1 or out < 1:
            raise ConfigError(
                f"bottleneck length < 1 at stage {stage} for input_length {config.input_length}")
        trace.append((length, odd, out))
        length = out
    return trace


class Module:
    """Tiny container: parameters and BN buffers discovered by attribute walk."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, np.ndarray):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_buffers(name + ".")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{name}.{i}.")

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv(Module):
    def __init__(self, rng, in_ch, out_ch, kernel, stride=1, padding=0):
        self.spec = F.ConvSpec(in_ch, out_ch, kernel, stride, padding)
        fan_in = in_ch * kernel
        self.weight = parameter(_uniform(rng, (out_ch, in_ch, kernel), fan_in))
        self.bias = parameter(_uniform(rng, (out_ch,), fan_in))

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias, self.spec.stride, self.spec.padding)


class ConvTranspose(Module):
    def __init__(self, rng, in_ch, out_ch, kernel, stride=1, padding=0):
        self.spec = F.ConvSpec(in_ch, out_ch, kernel, stride, padding)
        # PyTorch convention: fan_in is computed from weight.size(1) * kernel
        fan_in = out_ch * kernel
        self.weight = parameter(_uniform(rng, (in_ch, out_ch, kernel), fan_in))
        self.bias = parameter(_uniform(rng, (out_ch,), fan_in))

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv_transpose1d(x, self.weight, self.bias, self.spec.stride, self.spec.padding)


class BatchNorm(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.gamma = parameter(np.ones(channels))
        self.beta = parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps
        self.training = True

    def __call__(self, x: Tensor) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class InceptionBranch(Module):
    def __init__(self, rng, channels, width, kernel, cfg: ModelConfig):
        self.reduce = Conv(rng, channels, width, 1)
        self.conv = Conv(rng, width, width, kernel, 1, (kernel - 1) // 2)
        self.bn = BatchNorm(width, cfg.bn_momentum, cfg.bn_eps)
        self.slope = cfg.leaky_slope

    def __call__(self, x: Tensor) -> Tensor:
        return F.leaky_relu(self.bn(self.conv(self.reduce(x))), self.slope)


class InceptionRes(Module):
    """Multi-kernel branches, each 1x1-reduced to C/n, concatenated and added to the input."""

    def __init__(self, rng, channels: int, cfg: ModelConfig):
        n = len(cfg.inception_kernels)
        if channels % n:
            raise ShapeError(f"{channels} channels not divisible by {n} inception branches")
        self.channels = channels
        width = channels // n
        self.branches = [InceptionBranch(rng, channels, width, k, cfg) for k in cfg.inception_kernels]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"inception block expects {self.channels} channels, got {x.shape[1]}")
        out = self.branches[0](x)
        for branch in self.branches[1:]:
            out = F.concat_channels(out, branch(x))
        return F.add(x, out)


class EncoderStage(Module):
    def __init__(self, rng, in_ch, out_ch, odd: bool, cfg: ModelConfig):
        k, s = cfg.down_kernel, cfg.down_stride
        # stride-1 kernel-4 padding-1 conv trims one sample from odd lengths
        self.adjust = Conv(rng, in_ch, in_ch, 4, 1, 1) if odd else None
        self.down = Conv(rng, in_ch, out_ch, k, s, (k - s) // 2)
        self.bn = BatchNorm(out_ch, cfg.bn_momentum, cfg.bn_eps)
        self.block = InceptionRes(rng, out_ch, cfg)
        self.slope = cfg.leaky_slope

    def __call__(self, x: Tensor) -> Tensor:
        if self.adjust is not None:
            x = self.adjust(x)
        return self.block(F.leaky_relu(self.bn(self.down(x)), self.slope))


class DecoderStage(Module):
    def __init__(self, rng, in_ch, out_ch, skip_ch, odd: bool, cfg: ModelConfig):
        k, s = cfg.down_kernel, cfg.down_stride
        self.up = ConvTranspose(rng, in_ch, out_ch, k, s, (k - s) // 2)
        # mirror of the encoder adjuster: adds one sample back
        self.adjust = ConvTranspose(rng, out_ch, out_ch, 4, 1, 1) if odd else None
        fk = cfg.fuse_kernel
        self.fuse = Conv(rng, out_ch + skip_ch, out_ch, fk, 1, (fk - 1) // 2)
        self.bn = BatchNorm(out_ch, cfg.bn_momentum, cfg.bn_eps)
        self.block = InceptionRes(rng, out_ch, cfg) if cfg.decoder_incres else None
        self.slope = cfg.leaky_slope

    def __call__(self, x: Tensor, skip: Tensor) -> Tensor:
        x = self.up(x)
        if self.adjust is not None:
            x = self.adjust(x)
        x = F.concat_channels(x, skip)
        x = F.leaky_relu(self.bn(self.fuse(x)), self.slope)
        if self.block is not None:
            x = self.block(x)
        return x


class IncResUNet(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator, in_channels: int = 1):
        self.config = config
        trace = length_trace(config)
        self.trace = trace
        widths = [channels_at(config, s) for s in range(config.depth)]

        self.encoder = []
        in_ch = in_channels
        for stage, (_, odd, _) in enumerate(trace):
            self.encoder.append(EncoderStage(rng, in_ch, widths[stage], odd, config))
            in_ch = widths[stage]

        # decoder stage s restores the input length of encoder stage s
        self.decoder = []
        for stage in reversed(range(config.depth)):
            out_ch = widths[stage - 1] if stage > 0 else widths[0]
            skip_ch = widths[stage - 1] if stage > 0 else in_channels
            self.decoder.append(DecoderStage(rng, in_ch, out_ch, skip_ch, trace[stage][1], config))
            in_ch = out_ch
        self.head = Conv(rng, in_ch, 1, 1)

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def encode(self, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
        skips = []
        for stage in self.encoder:
            skips.append(x)
            x = stage(x)
        return x, skips

    def decode(self, z: Tensor, skips: List[Tensor]) -> Tensor:
        for stage, skip in zip(self.decoder, reversed(skips)):
            z = stage(z, skip)
        return F.sigmoid(self.head(z))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.config.input_length:
            raise ShapeError(
                f"expected input (batch, 1, {self.config.input_length}), got {x.shape}")
        z, skips = self.encode(x)
        return self.decode(z, skips)

    def train(self, mode: bool = True) -> "IncResUNet":
        for m in self.modules():
            if isinstance(m, BatchNorm):
                m.training = mode
        return self

    def eval(self) -> "IncResUNet":
        return self.train(False)

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Every array that defines the model: parameters then BN running stats."""
        state = {name: p.data for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = buf
        return state

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None

    def n_parameters(self) -> int:
        return sum(p.data.size for _, p in self.named_parameters())


def build(config: ModelConfig, seed: int = 0) -> IncResUNet:
    """Instantiate the network with uniform(+-1/sqrt(fan_in)) weights drawn from ``seed``."""
    return IncResUNet(config, np.random.default_rng(seed))


def forward(model: IncResUNet, batch) -> Tensor:
    if not isinstance(batch, Tensor):
        batch = Tensor(batch)
    return model.forward(batch)
