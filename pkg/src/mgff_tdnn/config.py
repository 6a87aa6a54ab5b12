"""Architectural configuration shared by the model, complexity, and CLI."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelConfig:
    """Complete structural description of one embedding network.

    The reference configuration is the class default; ablation variants
    toggle ``use_dsm`` (front end replaced by a kernel-3 frame mapping),
    ``use_plp`` (drop the pooling branch), or ``use_tdnn`` (drop the
    dilated-convolution branch).
    """

    feature_dim: int = 80
    dsm_channels: int = 32
    expansion: int = 6
    mtdnn_layers: tuple[int, ...] = (3, 6, 4)
    mtdnn_mid_channels: tuple[int, ...] = (64, 128, 256)
    mtdnn_out_channels: tuple[int, ...] = (128, 256, 512)
    mtdnn_dilations: tuple[int, ...] = (1, 2, 2)
    plp_window: int = 8
    se_bottleneck: int = 128
    embedding_dim: int = 192
    use_dsm: bool = True
    use_plp: bool = True
    use_tdnn: bool = True

    def __post_init__(self):
        counts = {
            len(self.mtdnn_layers),
            len(self.mtdnn_mid_channels),
            len(self.mtdnn_out_channels),
            len(self.mtdnn_dilations),
        }
        if counts != {3}:
            raise ValueError("mtdnn block descriptions must all have length 3")
        if not (self.use_plp or self.use_tdnn):
            raise ValueError("at least one of use_plp/use_tdnn must be enabled")
        if self.plp_window < 2 or self.plp_window % 2:
            raise ValueError("plp_window must be an even integer >= 2")

    @property
    def plp_hop(self) -> int:
        # 50% window overlap
        return self.plp_window // 2

    @property
    def dsm_freq_bins(self) -> tuple[int, ...]:
        """Frequency extents after each of the three stride-2 stages."""
        bins = [self.feature_dim]
        for _ in range(3):
            bins.append(-(-bins[-1] // 2))
        return tuple(bins)

    @property
    def flattened_width(self) -> int:
        """Channel width of the frame sequence entering the M-TDNN stack.

        The kernel-3 mapping used when ``use_dsm`` is off targets the same
        width, so downstream shapes never depend on the toggle.
        """
        return self.dsm_channels * self.dsm_freq_bins[-1]

    @property
    def pooled_dim(self) -> int:
        return 2 * self.mtdnn_out_channels[-1]

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in fields}
        for key in ("mtdnn_layers", "mtdnn_mid_channels", "mtdnn_out_channels",
                    "mtdnn_dilations"):
            kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def full(cls) -> "ModelConfig":
        return cls()

    @classmethod
    def without_dsm(cls) -> "ModelConfig":
        return cls(use_dsm=False)

    @classmethod
    def without_plp(cls) -> "ModelConfig":
        return cls(use_plp=False)

    @classmethod
    def without_tdnn(cls) -> "ModelConfig":
        return cls(use_tdnn=False)

    @classmethod
    def desk_scale(cls) -> "ModelConfig":
        """Quarter-width variant with [1, 2, 1] blocks for laptop training."""
        return cls(
            dsm_channels=8,
            mtdnn_layers=(1, 2, 1),
            mtdnn_mid_channels=(16, 32, 64),
            mtdnn_out_channels=(32, 64, 128),
            se_bottleneck=32,
        )

    @classmethod
    def micro(cls) -> "ModelConfig":
        """Tiny end-to-end variant for finite-difference gradient checks."""
        return cls(
            dsm_channels=2,
            mtdnn_layers=(1, 1, 1),
            mtdnn_mid_channels=(3, 4, 5),
            mtdnn_out_channels=(6, 8, 10),
            se_bottleneck=4,
            embedding_dim=6,
        )
