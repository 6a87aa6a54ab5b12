"""Desk-scale training: SGD with momentum, warmup+cosine schedule, and a
synthetic multi-speaker dataset.

Each synthetic speaker is a fixed set of spectral resonances; utterances
are white noise shaped by that envelope (with per-utterance jitter),
rendered to a waveform and FBank-extracted, so intra-speaker features are
much closer than inter-speaker ones.  The loop crops fixed-length
segments, batches utterance vectors through the embedding batch norm, and
optimizes the AAM-softmax objective.  Everything is deterministic given
the config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, stack_rows
from .config import ModelConfig
from .features import SAMPLE_RATE, AudioSignal, FeatureMatrix, compute_fbank, crop_random
from .layers import Module
from .loss import AamSoftmaxHead, aam_softmax_loss
from .model import SpeakerEmbedder


@dataclass
class TrainConfig:
    lr_init: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_min: float = 1e-4
    warmup_steps: int = 30
    total_steps: int = 300
    batch_size: int = 8
    crop_frames: int = 298
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.lr_min < self.lr_init:
            raise ValueError("require 0 < lr_min < lr_init")
        if not 0 < self.warmup_steps < self.total_steps:
            raise ValueError("require 0 < warmup_steps < total_steps")


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear ramp to lr_init over the warmup, then cosine decay to lr_min."""
    if step < 0 or step > cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    if step <= cfg.warmup_steps:
        return cfg.lr_init * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.lr_min + (cfg.lr_init - cfg.lr_min) * 0.5 * (1.0 + np.cos(np.pi * progress))


class SgdOptimizer:
    """SGD with momentum; weight decay hits conv/linear weights only.

    Update: velocity = momentum * velocity + grad + wd * param;
    param -= lr * velocity.
    """

    def __init__(self, named_params, momentum: float, weight_decay: float):
        self.entries = []
        for name, p in named_params:
            decay = weight_decay if name.endswith("weight") else 0.0
            self.entries.append((p, decay, np.zeros_like(p.data)))
        self.momentum = momentum

    def step(self, lr: float) -> None:
        for p, decay, velocity in self.entries:
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if grad.shape != p.data.shape:
                raise ValueError("gradient/parameter shape mismatch")
            velocity *= self.momentum
            velocity += grad
            if decay:
                velocity += decay * p.data
            p.data -= lr * velocity

    def state_records(self) -> dict[str, np.ndarray]:
        return {f"velocity.{i}": v for i, (_, _, v) in enumerate(self.entries)}


@dataclass
class SpeakerSignature:
    centers_hz: np.ndarray
    bandwidths_hz: np.ndarray
    gains: np.ndarray


@dataclass
class SyntheticDataset:
    num_speakers: int
    utterances_per_speaker: int
    seed: int
    signatures: list[SpeakerSignature] = field(default_factory=list)
    features: list[FeatureMatrix] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.features)


def _render_utterance(rng: np.random.Generator, sig: SpeakerSignature,
                      duration_s: float) -> AudioSignal:
    n = int(duration_s * SAMPLE_RATE)
    noise = rng.standard_normal(n)
    spectrum = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE)
    # per-utterance jitter keeps speakers distinct but utterances varied
    gains = sig.gains * rng.uniform(0.8, 1.2, size=sig.gains.size)
    centers = sig.centers_hz * rng.uniform(0.98, 1.02, size=sig.centers_hz.size)
    envelope = np.full_like(freqs, 1e-3)
    for c, b, g in zip(centers, sig.bandwidths_hz, gains):
        envelope += g * np.exp(-0.5 * ((freqs - c) / b) ** 2)
    shaped = np.fft.irfft(spectrum * envelope, n=n)
    peak = np.max(np.abs(shaped))
    return AudioSignal(shaped / peak * 0.6)


def make_synthetic_dataset(num_speakers: int, utterances_per_speaker: int,
                           seed: int, duration_s: float = 3.4) -> SyntheticDataset:
    """Generate FBank features for a deterministic multi-speaker corpus."""
    if num_speakers < 2:
        raise ValueError("need at least two speakers")
    rng = np.random.default_rng(seed)
    dataset = SyntheticDataset(num_speakers, utterances_per_speaker, seed)
    for speaker in range(num_speakers):
        sig = SpeakerSignature(
            centers_hz=np.exp(rng.uniform(np.log(200.0), np.log(3500.0), size=4)),
            bandwidths_hz=rng.uniform(80.0, 250.0, size=4),
            gains=rng.uniform(0.5, 2.0, size=4),
        )
        dataset.signatures.append(sig)
        for _ in range(utterances_per_speaker):
            signal = _render_utterance(rng, sig, duration_s)
            dataset.features.append(compute_fbank(signal))
            dataset.labels.append(speaker)
    return dataset


@dataclass
class StepRecord:
    step: int
    lr: float
    loss: float


def train(model: SpeakerEmbedder, dataset: SyntheticDataset, cfg: TrainConfig,
          head: AamSoftmaxHead | None = None, log_file=None) -> list[StepRecord]:
    """Run the crop/forward/AAM/backward/SGD loop; returns per-step records.

    Aborts with a diagnostic if the loss goes non-finite.
    """
    rng = np.random.default_rng(cfg.seed)
    if head is None:
        head = AamSoftmaxHead(dataset.num_speakers, model.cfg.embedding_dim,
                              rng=np.random.default_rng(cfg.seed + 1))
    trainable = list(model.named_parameters()) + [
        (f"head.{n}", p) for n, p in head.named_parameters()
    ]
    optimizer = SgdOptimizer(trainable, cfg.momentum, cfg.weight_decay)
    model.train()
    records: list[StepRecord] = []
    for step in range(1, cfg.total_steps + 1):
        picks = rng.integers(0, len(dataset), size=cfg.batch_size)
        vectors = []
        labels = []
        for i in picks:
            crop = crop_random(dataset.features[i], cfg.crop_frames,
                               rng_seed=int(rng.integers(2 ** 31)))
            vectors.append(model.utterance_vector(Tensor(crop.values)))
            labels.append(dataset.labels[i])
        batch = model.embed_bn(stack_rows(vectors))
        loss = aam_softmax_loss(batch, labels, head)
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise RuntimeError(
                f"training diverged at step {step}: loss={loss_value}"
            )
        model.zero_grad()
        head.zero_grad()
        loss.backward()
        lr = lr_schedule(step, cfg)
        optimizer.step(lr)
        records.append(StepRecord(step, lr, loss_value))
        if log_file is not None:
            log_file.write(f"{step} {lr:.6f} {loss_value:.6f}\n")
    return records


def smoothed_losses(records: list[StepRecord], window: int = 20) -> np.ndarray:
    """Trailing moving average of the per-step losses."""
    losses = np.array([r.loss for r in records])
    out = np.empty_like(losses)
    for i in range(losses.size):
        out[i] = losses[max(0, i - window + 1):i + 1].mean()
    return out
