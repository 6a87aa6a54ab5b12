"""Depthwise-separable time-frequency front end.

A stem 3x3 convolution lifts the 1 x 80 x T feature map to 32 channels,
then three inverted-residual stages halve the frequency axis (stride 2 on
frequency only, time untouched): 80 -> 40 -> 20 -> 10.  The result is
flattened channel-major into a (channels * 10) x T frame sequence.

Stride-2 stages carry no shortcut (the strided output cannot be added to
the input); stride-1 blocks add the identity before the final ReLU.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, relu, reshape
from .config import ModelConfig
from .errors import DimensionError
from .layers import BatchNorm, Conv1d, Conv2d, Module


class InvertedResidual(Module):
    """Pointwise expand -> depthwise 3x3 -> pointwise project, BN+ReLU between.

    ``stride`` applies to the frequency axis only.
    """

    def __init__(self, channels: int, expansion: int, stride: int,
                 rng: np.random.Generator):
        super().__init__()
        if stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {stride}")
        hidden = channels * expansion
        self.stride = stride
        self.pw_expand = Conv2d(channels, hidden, (1, 1), rng=rng)
        self.bn1 = BatchNorm(hidden)
        self.dw = Conv2d(hidden, hidden, (3, 3), stride=(stride, 1),
                         padding=(1, 1), groups=hidden, rng=rng)
        self.bn2 = BatchNorm(hidden)
        self.pw_project = Conv2d(hidden, channels, (1, 1), rng=rng)
        self.bn3 = BatchNorm(channels)

    def forward(self, x: Tensor) -> Tensor:
        h = relu(self.bn1(self.pw_expand(x)))
        h = relu(self.bn2(self.dw(h)))
        h = self.bn3(self.pw_project(h))
        if self.stride == 1:
            h = h + x
        return relu(h)


class DsmFrontEnd(Module):
    """Stem conv + three stride-2 inverted-residual stages + flatten."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        c = cfg.dsm_channels
        self.cfg = cfg
        self.stem = Conv2d(1, c, (3, 3), padding=(1, 1), rng=rng)
        self.stem_bn = BatchNorm(c)
        self.stages = [
            InvertedResidual(c, cfg.expansion, stride=2, rng=rng)
            for _ in range(3)
        ]

    def forward(self, x: Tensor) -> Tensor:
        """Map an 80 x T feature matrix to a flattened (C*10) x T sequence."""
        cfg = self.cfg
        if x.ndim != 2 or x.shape[0] != cfg.feature_dim:
            raise DimensionError(
                f"front end expects {cfg.feature_dim} x T features, got {x.shape}"
            )
        t = x.shape[1]
        h = reshape(x, (1, cfg.feature_dim, t))
        h = relu(self.stem_bn(self.stem(h)))
        assert h.shape == (cfg.dsm_channels, cfg.feature_dim, t)
        for stage, bins in zip(self.stages, cfg.dsm_freq_bins[1:]):
            h = stage(h)
            assert h.shape == (cfg.dsm_channels, bins, t)
        return reshape(h, (cfg.flattened_width, t))


class FrameMapping(Module):
    """Front-end replacement used when the DSM is ablated.

    A single kernel-3 convolution over time maps the 80-dim features to
    the same flattened width the DSM would produce, so the M-TDNN stack is
    unchanged.
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.conv = Conv1d(cfg.feature_dim, cfg.flattened_width, 3,
                           padding=1, rng=rng)
        self.bn = BatchNorm(cfg.flattened_width)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[0] != self.cfg.feature_dim:
            raise DimensionError(
                f"front end expects {self.cfg.feature_dim} x T features, "
                f"got {x.shape}"
            )
        return relu(self.bn(self.conv(x)))


def build_front_end(cfg: ModelConfig, rng: np.random.Generator) -> Module:
    return DsmFrontEnd(cfg, rng) if cfg.use_dsm else FrameMapping(cfg, rng)
