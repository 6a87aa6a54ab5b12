"""Additive-angular-margin softmax training head.

Logits are cosines between L2-normalized embeddings and L2-normalized
class weights; the target class cosine is replaced by cos(theta + margin)
and everything is scaled before the cross-entropy.  Where theta + margin
would pass pi (cosine below cos(pi - margin)), the target logit falls
back to cos(theta) - margin*sin(margin), which keeps the penalty
monotone in theta.
"""

from __future__ import annotations

import math

import numpy as np

from .autograd import Tensor, clip, exp, log, matmul, tsum
from .layers import Module, glorot_uniform

_COS_CLIP = 1e-9


class AamSoftmaxHead(Module):
    """Class-weight matrix plus margin/scale hyperparameters."""

    def __init__(self, num_classes: int, embedding_dim: int, *,
                 margin: float = 0.2, scale: float = 32.0, rng=None):
        super().__init__()
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.num_classes = num_classes
        self.embedding_dim = embedding_dim
        self.margin = margin
        self.scale = scale
        self.weight = Tensor(
            glorot_uniform(rng, (num_classes, embedding_dim),
                           embedding_dim, num_classes),
            requires_grad=True,
        )


def _row_normalize(x: Tensor, what: str) -> Tensor:
    norms = np.sqrt((x.data ** 2).sum(axis=1))
    if np.any(norms == 0.0):
        raise ValueError(f"zero-norm {what} cannot be cosine-normalized")
    inv = (tsum(x ** 2, axis=1, keepdims=True)) ** -0.5
    return x * inv


def aam_softmax_loss(embeddings: Tensor, labels, head: AamSoftmaxHead) -> Tensor:
    """Mean AAM-softmax cross-entropy over a batch.

    ``embeddings`` is (B, D) or a single (D,) vector; ``labels`` holds one
    class index per row.
    """
    if embeddings.ndim == 1:
        embeddings = embeddings.reshape((1, embeddings.size))
    labels = np.asarray(labels, dtype=np.intp)
    batch, dim = embeddings.shape
    if labels.shape != (batch,):
        raise ValueError(f"expected {batch} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= head.num_classes:
        raise ValueError(
            f"label out of range [0, {head.num_classes}): {labels.min()}..{labels.max()}"
        )
    if dim != head.embedding_dim:
        raise ValueError(f"embedding dim {dim} != head dim {head.embedding_dim}")

    cos = matmul(_row_normalize(embeddings, "embedding"),
                 _row_normalize(head.weight, "class weight").transpose())
    cos = clip(cos, -1.0 + _COS_CLIP, 1.0 - _COS_CLIP)

    m = head.margin
    sin = (1.0 - cos ** 2) ** 0.5
    shifted = cos * math.cos(m) - sin * math.sin(m)
    # monotonicity guard: past theta + m = pi use a linear penalty instead
    usable = Tensor((cos.data > math.cos(math.pi - m)).astype(np.float64))
    target_logit = usable * shifted + (1.0 - usable) * (cos - m * math.sin(m))

    onehot = np.zeros((batch, head.num_classes))
    onehot[np.arange(batch), labels] = 1.0
    onehot_t = Tensor(onehot)
    logits = (onehot_t * target_logit + (1.0 - onehot_t) * cos) * head.scale

    # stable log-softmax; the shift is a constant so gradients are unaffected
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    lse = log(tsum(exp(logits - shift), axis=1, keepdims=True)) + shift
    log_probs = logits - lse
    return -tsum(log_probs * onehot_t) * (1.0 / batch)
