"""Closed-form parameter and FLOPs accounting for any ModelConfig.

Counts are pure arithmetic over the layer plan — no tensors are
instantiated — so ``verify_against_instantiation`` is a genuine
cross-check against the real model.  Conventions: one multiply-accumulate
is one FLOP; convolution/linear MACs use output-size x kernel-size x
in-channels/groups; batch-norm, activations, pooling, and residual adds
are tallied separately as ``aux_flops``.  The headline parameter count is
trainable parameters only (conv/linear weights and biases, BN gamma/beta);
running statistics and the classification head are excluded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .config import ModelConfig
from .errors import ComplexityMismatchError


@dataclass
class LayerCost:
    name: str
    params: int = 0
    macs: int = 0
    aux_flops: int = 0


@dataclass
class ComplexityReport:
    entries: list[LayerCost]
    num_frames: int

    @property
    def total_params(self) -> int:
        return sum(e.params for e in self.entries)

    @property
    def total_macs(self) -> int:
        return sum(e.macs for e in self.entries)

    @property
    def total_aux_flops(self) -> int:
        return sum(e.aux_flops for e in self.entries)

    @property
    def total_flops(self) -> int:
        return self.total_macs + self.total_aux_flops

    def format_table(self) -> str:
        width = max(len(e.name) for e in self.entries) + 2
        lines = [f"{'layer':<{width}}{'params':>12}{'macs':>16}{'aux_flops':>14}"]
        for e in self.entries:
            lines.append(
                f"{e.name:<{width}}{e.params:>12}{e.macs:>16}{e.aux_flops:>14}"
            )
        lines.append(
            f"{'total':<{width}}{self.total_params:>12}{self.total_macs:>16}"
            f"{self.total_aux_flops:>14}"
        )
        lines.append(
            f"frames={self.num_frames}  params={self.total_params / 1e6:.3f}M  "
            f"macs={self.total_macs / 1e9:.3f}G  flops={self.total_flops / 1e9:.3f}G"
        )
        return "\n".join(lines)

    def to_json(self) -> str:
        payload = {
            "num_frames": self.num_frames,
            "layers": [
                {"name": e.name, "params": e.params, "macs": e.macs,
                 "aux_flops": e.aux_flops}
                for e in self.entries
            ],
            "total_params": self.total_params,
            "total_macs": self.total_macs,
            "total_aux_flops": self.total_aux_flops,
            "total_flops": self.total_flops,
        }
        return json.dumps(payload, indent=2)


def conv1d_macs(c_in: int, c_out: int, kernel: int, t_out: int,
                groups: int = 1) -> int:
    return t_out * c_out * (c_in // groups) * kernel


def conv2d_macs(c_in: int, c_out: int, kernel: tuple[int, int],
                f_out: int, t_out: int, groups: int = 1) -> int:
    return f_out * t_out * c_out * (c_in // groups) * kernel[0] * kernel[1]


def _plan(cfg: ModelConfig, t: int) -> list[LayerCost]:
    entries: list[LayerCost] = []

    def conv1(name, c_in, c_out, k, groups=1):
        entries.append(LayerCost(
            name,
            params=c_out * (c_in // groups) * k + c_out,
            macs=conv1d_macs(c_in, c_out, k, t, groups),
        ))

    def conv2(name, c_in, c_out, kernel, f_out, groups=1):
        entries.append(LayerCost(
            name,
            params=c_out * (c_in // groups) * kernel[0] * kernel[1] + c_out,
            macs=conv2d_macs(c_in, c_out, kernel, f_out, t, groups),
        ))

    def bn(name, channels, elements, with_relu=True):
        # eval-mode scale+shift is 2 flops/element, ReLU one more
        entries.append(LayerCost(
            name,
            params=2 * channels,
            aux_flops=(3 if with_relu else 2) * elements,
        ))

    if cfg.use_dsm:
        c = cfg.dsm_channels
        hidden = c * cfg.expansion
        bins = cfg.dsm_freq_bins
        conv2("front.stem", 1, c, (3, 3), bins[0])
        bn("front.stem_bn", c, c * bins[0] * t)
        for i in range(3):
            f_in, f_out = bins[i], bins[i + 1]
            prefix = f"front.stages.{i}"
            conv2(f"{prefix}.pw_expand", c, hidden, (1, 1), f_in)
            bn(f"{prefix}.bn1", hidden, hidden * f_in * t)
            conv2(f"{prefix}.dw", hidden, hidden, (3, 3), f_out, groups=hidden)
            bn(f"{prefix}.bn2", hidden, hidden * f_out * t)
            conv2(f"{prefix}.pw_project", hidden, c, (1, 1), f_out)
            bn(f"{prefix}.bn3", c, c * f_out * t)
    else:
        conv1("front.conv", cfg.feature_dim, cfg.flattened_width, 3)
        bn("front.bn", cfg.flattened_width, cfg.flattened_width * t)

    in_ch = cfg.flattened_width
    branches = int(cfg.use_tdnn) + int(cfg.use_plp)
    layer_index = 0
    for count, mid, out, dil in zip(cfg.mtdnn_layers, cfg.mtdnn_mid_channels,
                                    cfg.mtdnn_out_channels, cfg.mtdnn_dilations):
        for _ in range(count):
            prefix = f"mtdnn.layers.{layer_index}"
            conv1(f"{prefix}.bottleneck", in_ch, mid, 1)
            bn(f"{prefix}.bottleneck_bn", mid, mid * t)
            if cfg.use_tdnn:
                conv1(f"{prefix}.context_conv", mid, mid, 3)
                bn(f"{prefix}.context_bn", mid, mid * t)
            if cfg.use_plp:
                # one comparison per element per covering window (at most 2)
                entries.append(LayerCost(f"{prefix}.plp", aux_flops=2 * mid * t))
            fused = branches * mid
            entries.append(LayerCost(
                f"{prefix}.se.squeeze_fc",
                params=cfg.se_bottleneck * fused + cfg.se_bottleneck,
                macs=cfg.se_bottleneck * fused,
            ))
            entries.append(LayerCost(
                f"{prefix}.se.excite_fc",
                params=fused * cfg.se_bottleneck + fused,
                macs=fused * cfg.se_bottleneck,
                # squeeze mean + gate multiply + sigmoid
                aux_flops=2 * fused * t + 4 * fused,
            ))
            conv1(f"{prefix}.out_conv", fused, out, 1)
            bn(f"{prefix}.out_bn", out, out * t)
            if in_ch != out:
                conv1(f"{prefix}.shortcut", in_ch, out, 1)
            # residual add plus the outer ReLU
            entries.append(LayerCost(f"{prefix}.residual", aux_flops=2 * out * t))
            in_ch = out
            layer_index += 1

    pooled = cfg.pooled_dim
    entries.append(LayerCost(
        "pooling", aux_flops=4 * cfg.mtdnn_out_channels[-1] * t
    ))
    entries.append(LayerCost(
        "fc",
        params=pooled * cfg.embedding_dim + cfg.embedding_dim,
        macs=pooled * cfg.embedding_dim,
    ))
    entries.append(LayerCost(
        "embed_bn",
        params=2 * cfg.embedding_dim,
        aux_flops=2 * cfg.embedding_dim,
    ))
    return entries


def count_params(cfg: ModelConfig) -> ComplexityReport:
    """Analytic trainable-parameter report (frame count irrelevant)."""
    return ComplexityReport(_plan(cfg, 1), num_frames=1)


def count_flops(cfg: ModelConfig, num_frames: int) -> ComplexityReport:
    """Analytic MAC/FLOP report for an utterance of ``num_frames`` frames."""
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    return ComplexityReport(_plan(cfg, num_frames), num_frames=num_frames)


def verify_against_instantiation(cfg: ModelConfig) -> bool:
    """Check the analytic per-layer parameter counts against a real model.

    Raises ComplexityMismatchError with per-layer diffs on divergence.
    """
    from .model import SpeakerEmbedder

    analytic = {e.name: e.params for e in _plan(cfg, 1) if e.params}
    model = SpeakerEmbedder(cfg, rng=0)
    actual: dict[str, int] = {}
    for name, tensor in model.named_parameters():
        layer = name.rsplit(".", 1)[0]
        actual[layer] = actual.get(layer, 0) + tensor.size
    diffs = []
    for layer in sorted(set(analytic) | set(actual)):
        a, b = analytic.get(layer, 0), actual.get(layer, 0)
        if a != b:
            diffs.append(f"{layer}: analytic {a} != instantiated {b}")
    if diffs:
        raise ComplexityMismatchError(
            f"analytic/instantiated parameter mismatch for {len(diffs)} layers",
            diffs,
        )
    return True
