"""Utterance-level model: front end, M-TDNN stack, pooling, embedding head."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, concat, no_grad
from .config import ModelConfig
from .dsm import build_front_end
from .errors import DimensionError
from .features import FeatureMatrix
from .layers import BatchNorm, Linear, Module
from .mtdnn import MTdnnNetwork

STD_EPS = 1e-10


def statistics_pooling(x: Tensor) -> Tensor:
    """Per-channel temporal mean and population standard deviation.

    Maps (C, T) to a length-2C vector; the epsilon inside the square root
    keeps constant-input channels finite (std ~ 1e-5 instead of NaN).
    """
    if x.ndim != 2 or x.shape[1] < 1:
        raise DimensionError(f"statistics pooling expects (C, T>=1), got {x.shape}")
    mean = x.mean(axis=1)
    var = ((x - mean.reshape((x.shape[0], 1))) ** 2).mean(axis=1)
    std = (var + STD_EPS) ** 0.5
    return concat([mean, std], axis=0)


class SpeakerEmbedder(Module):
    """End-to-end embedding network for 80 x T feature matrices."""

    def __init__(self, cfg: ModelConfig, rng=None):
        super().__init__()
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.cfg = cfg
        self.front = build_front_end(cfg, rng)
        self.mtdnn = MTdnnNetwork(cfg, rng)
        self.fc = Linear(cfg.pooled_dim, cfg.embedding_dim, rng=rng)
        self.embed_bn = BatchNorm(cfg.embedding_dim, channel_axis=-1)

    def utterance_vector(self, x: Tensor) -> Tensor:
        """Frames to the pre-normalization utterance vector (training path)."""
        h = self.front(x)
        h = self.mtdnn(h)
        return self.fc(statistics_pooling(h))

    def forward(self, x: Tensor) -> Tensor:
        vec = self.utterance_vector(x)
        return self.embed_bn(vec.reshape((1, self.cfg.embedding_dim))).reshape(
            (self.cfg.embedding_dim,)
        )

    def embed(self, features: FeatureMatrix) -> np.ndarray:
        """Deterministic eval-mode embedding of one utterance."""
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                out = self.forward(Tensor(features.values))
        finally:
            self.train(was_training)
        values = out.data.copy()
        if not np.all(np.isfinite(values)):
            raise ValueError("embedding contains non-finite values")
        return values
