"""Parameterized layers on top of the autograd core.

A ``Module`` owns parameter tensors (``requires_grad=True``) and buffer
tensors (running statistics, ``requires_grad=False``) as attributes, and
may nest child modules directly or in lists.  ``named_parameters`` walks
the tree in construction order, so parameter enumeration is deterministic.

Initialization: conv/linear weights are uniform in
±sqrt(6/(fan_in+fan_out)), biases zero, BN gamma 1 / beta 0.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, conv1d, conv2d, matmul, add
from .errors import DimensionError


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Base class providing parameter traversal and train/eval switching."""

    def __init__(self):
        self.training = True

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_tensors(self, prefix: str = ""):
        """All parameter and buffer tensors, depth first, in creation order."""
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                yield (f"{prefix}{name}", value)
        for name, child in self._children():
            yield from child.named_tensors(f"{prefix}{name}.")

    def named_parameters(self, prefix: str = ""):
        for name, t in self.named_tensors(prefix):
            if t.requires_grad:
                yield name, t

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def train(self, mode: bool = True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv1d(Module):
    """Grouped dilated 1-D convolution layer over (C, T) inputs."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, *,
                 stride: int = 1, dilation: int = 1, padding: int = 0,
                 groups: int = 1, bias: bool = True,
                 rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.dilation = dilation
        self.padding = padding
        self.groups = groups
        fan_in = (in_channels // groups) * kernel
        fan_out = (out_channels // groups) * kernel
        self.weight = Tensor(
            glorot_uniform(rng, (out_channels, in_channels // groups, kernel),
                           fan_in, fan_out),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv1d(x, self.weight, self.bias, stride=self.stride,
                      dilation=self.dilation, padding=self.padding,
                      groups=self.groups)


class Conv2d(Module):
    """Grouped 2-D convolution layer over (C, F, T) inputs."""

    def __init__(self, in_channels: int, out_channels: int,
                 kernel: tuple[int, int], *,
                 stride: tuple[int, int] = (1, 1),
                 dilation: tuple[int, int] = (1, 1),
                 padding: tuple[int, int] = (0, 0),
                 groups: int = 1, bias: bool = True,
                 rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.dilation = dilation
        self.padding = padding
        self.groups = groups
        k = kernel[0] * kernel[1]
        fan_in = (in_channels // groups) * k
        fan_out = (out_channels // groups) * k
        self.weight = Tensor(
            glorot_uniform(rng, (out_channels, in_channels // groups, *kernel),
                           fan_in, fan_out),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride,
                      dilation=self.dilation, padding=self.padding,
                      groups=self.groups)


class Linear(Module):
    """Affine map ``weight @ x + bias`` for 1-D inputs."""

    def __init__(self, in_features: int, out_features: int, *,
                 bias: bool = True, rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(
            glorot_uniform(rng, (out_features, in_features), in_features, out_features),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features and x.shape[0] != self.in_features:
            raise DimensionError(
                f"linear: input {x.shape} incompatible with weight "
                f"({self.out_features}, {self.in_features})"
            )
        out = matmul(self.weight, x)
        return add(out, self.bias) if self.bias is not None else out


class BatchNorm(Module):
    """Batch normalization over all axes except ``channel_axis``.

    Train mode normalizes with the current batch's population statistics
    (divide by N) and folds them into the running buffers with the same
    population convention; eval mode is a deterministic affine transform
    built from the running statistics.
    """

    def __init__(self, channels: int, *, eps: float = 1e-5,
                 momentum: float = 0.1, channel_axis: int = 0):
        super().__init__()
        if eps <= 0.0:
            raise ValueError(f"batch norm epsilon must be positive, got {eps}")
        if not 0.0 < momentum < 1.0:
            raise ValueError(f"momentum must lie in (0,1), got {momentum}")
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.channel_axis = channel_axis
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = Tensor(np.zeros(channels))
        self.running_var = Tensor(np.ones(channels))

    def _param_shape(self, ndim: int) -> tuple[int, ...]:
        shape = [1] * ndim
        shape[self.channel_axis % ndim] = self.channels
        return tuple(shape)

    def forward(self, x: Tensor) -> Tensor:
        ax = self.channel_axis % x.ndim
        if x.shape[ax] != self.channels:
            raise DimensionError(
                f"batch norm over {self.channels} channels got input {x.shape} "
                f"(channel axis {ax})"
            )
        shape = self._param_shape(x.ndim)
        reduce_axes = tuple(i for i in range(x.ndim) if i != ax)
        gamma = self.gamma.reshape(shape)
        beta = self.beta.reshape(shape)
        if self.training:
            n = int(np.prod([x.shape[i] for i in reduce_axes])) if reduce_axes else 1
            if n < 2:
                raise DimensionError(
                    "train-mode batch norm needs more than one element per channel"
                )
            mu = x.mean(axis=reduce_axes, keepdims=True)
            var = ((x - mu) ** 2).mean(axis=reduce_axes, keepdims=True)
            out = (x - mu) * (var + self.eps) ** -0.5 * gamma + beta
            m = self.momentum
            self.running_mean.data = (
                (1.0 - m) * self.running_mean.data + m * mu.data.reshape(self.channels)
            )
            self.running_var.data = (
                (1.0 - m) * self.running_var.data + m * var.data.reshape(self.channels)
            )
            return out
        inv_std = Tensor((self.running_var.data + self.eps) ** -0.5)
        scale = gamma * inv_std.reshape(shape)
        shift = beta - Tensor(self.running_mean.data).reshape(shape) * scale
        return x * scale + shift
