"""Multi-granularity TDNN stack.

Each layer reduces the input with a kernel-1 bottleneck convolution, runs
two granularity branches over the reduced sequence — a dilated kernel-3
convolution for context and a phoneme-level max-pooling branch for local
detail — fuses the concatenated branches with squeeze-excitation channel
gates, and maps back up with a kernel-1 convolution plus a residual
connection.  Three blocks of [3, 6, 4] layers produce 128/256/512
channels with dilations 1/2/2 while preserving the time axis throughout.
"""

from __future__ import annotations

import numpy as np

from .autograd import (Tensor, concat, linear, maximum, relu, same_padding,
                       sigmoid, stack_rows, take)
from .config import ModelConfig
from .errors import DimensionError
from .layers import BatchNorm, Conv1d, Linear, Module


def phoneme_level_pool(x: Tensor, window: int = 8, hop: int = 4) -> Tensor:
    """Max-pool over sliding windows and spread the pooled values back out.

    Windows start every ``hop`` frames and cover ``window`` frames (the
    tail window pools whatever frames remain).  Each output frame takes
    the elementwise max of the pooled vectors of every window covering it,
    so the output has the input's exact shape and out[c,t] >= x[c,t].
    """
    if x.ndim != 2:
        raise DimensionError(f"pooling expects a (C, T) tensor, got {x.shape}")
    t = x.shape[1]
    starts = range(0, t, hop)
    window_maxes = [x[:, s:min(s + window, t)].max(axis=1, keepdims=True)
                    for s in starts]
    pooled = concat(window_maxes, axis=1)            # (C, num_windows)
    current = np.arange(t) // hop
    previous = np.maximum(current - 1, 0)
    covering = np.where((previous * hop + window) > np.arange(t), previous, current)
    return maximum(take(pooled, current, axis=1), take(pooled, covering, axis=1))


class SqueezeExcite(Module):
    """Channel gates from a time-averaged summary through a bottleneck MLP."""

    def __init__(self, channels: int, bottleneck: int, rng: np.random.Generator):
        super().__init__()
        self.channels = channels
        self.squeeze_fc = Linear(channels, bottleneck, rng=rng)
        self.excite_fc = Linear(bottleneck, channels, rng=rng)

    def gates(self, x: Tensor) -> Tensor:
        summary = x.mean(axis=1)
        hidden = relu(self.squeeze_fc(summary))
        return sigmoid(self.excite_fc(hidden))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[0] != self.channels:
            raise DimensionError(
                f"squeeze-excitation over {self.channels} channels got {x.shape}"
            )
        gates = self.gates(x)
        return x * gates.reshape((self.channels, 1))


class MTdnnLayer(Module):
    """One multi-granularity layer: bottleneck, branches, SE fusion, residual."""

    def __init__(self, in_channels: int, mid_channels: int, out_channels: int,
                 dilation: int, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.in_channels = in_channels
        self.mid_channels = mid_channels
        self.out_channels = out_channels
        self.cfg = cfg
        self.bottleneck = Conv1d(in_channels, mid_channels, 1, rng=rng)
        self.bottleneck_bn = BatchNorm(mid_channels)
        if cfg.use_tdnn:
            self.context_conv = Conv1d(mid_channels, mid_channels, 3,
                                       dilation=dilation,
                                       padding=same_padding(3, dilation),
                                       rng=rng)
            self.context_bn = BatchNorm(mid_channels)
        branches = int(cfg.use_tdnn) + int(cfg.use_plp)
        self.se = SqueezeExcite(branches * mid_channels, cfg.se_bottleneck, rng)
        self.out_conv = Conv1d(branches * mid_channels, out_channels, 1, rng=rng)
        self.out_bn = BatchNorm(out_channels)
        if in_channels != out_channels:
            self.shortcut = Conv1d(in_channels, out_channels, 1, rng=rng)
        else:
            self.shortcut = None

    def branch_outputs(self, reduced: Tensor) -> list[Tensor]:
        # concatenation order: context branch first, then pooling branch
        outs = []
        if self.cfg.use_tdnn:
            outs.append(relu(self.context_bn(self.context_conv(reduced))))
        if self.cfg.use_plp:
            outs.append(phoneme_level_pool(reduced, self.cfg.plp_window,
                                           self.cfg.plp_hop))
        return outs

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[0] != self.in_channels:
            raise DimensionError(
                f"m-tdnn layer expects ({self.in_channels}, T), got {x.shape}"
            )
        reduced = relu(self.bottleneck_bn(self.bottleneck(x)))
        branches = self.branch_outputs(reduced)
        fused = self.se(branches[0] if len(branches) == 1 else concat(branches, axis=0))
        mapped = relu(self.out_bn(self.out_conv(fused)))
        identity = self.shortcut(x) if self.shortcut is not None else x
        return relu(identity + mapped)


class MTdnnNetwork(Module):
    """The three-block stack of multi-granularity layers."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        layers = []
        in_ch = cfg.flattened_width
        for count, mid, out, dil in zip(cfg.mtdnn_layers, cfg.mtdnn_mid_channels,
                                        cfg.mtdnn_out_channels, cfg.mtdnn_dilations):
            for _ in range(count):
                layers.append(MTdnnLayer(in_ch, mid, out, dil, cfg, rng))
                in_ch = out
        self.layers = layers

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[0] != self.cfg.flattened_width:
            raise DimensionError(
                f"m-tdnn stack expects ({self.cfg.flattened_width}, T), "
                f"got {x.shape}"
            )
        for layer in self.layers:
            x = layer(x)
        return x


__all__ = [
    "MTdnnLayer",
    "MTdnnNetwork",
    "SqueezeExcite",
    "phoneme_level_pool",
    "stack_rows",
]
