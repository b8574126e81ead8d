"""Dataclass configs for the model and training run.

Dict round-trips are strict: unknown keys are rejected so config files and
checkpoints cannot silently drift.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def default_conv1d_spec(d: int) -> list[list[int]]:
    """(channels, kernel, stride) per layer; strides multiply to 8."""
    return [[64, 3, 1], [64, 3, 2], [128, 3, 1], [128, 3, 2], [256, 3, 1], [d, 3, 2]]


@dataclass
class EncoderConfig:
    """Shared width d plus the two conv stacks' shape contracts.

    The trajectory stack downsamples time by 8; the image stack has total
    stride (32, 8) so height 32 collapses to one row. d must be divisible
    by 8 (position-embedding pairing needs d % 4 == 0; the image-stack
    channel ladder d/8 .. d needs d % 8 == 0).
    """

    d: int = 320
    conv1d_spec: list[list[int]] | None = None
    cnn2d_blocks: int = 1
    gru_layers: int = 2

    def resolved_conv1d_spec(self) -> list[list[int]]:
        return self.conv1d_spec if self.conv1d_spec is not None else default_conv1d_spec(self.d)

    def validate(self) -> None:
        if self.d <= 0 or self.d % 8 != 0:
            raise ConfigError(f"d must be a positive multiple of 8, got {self.d}")
        spec = self.resolved_conv1d_spec()
        if len(spec) != 6:
            raise ConfigError(f"conv1d_spec must have 6 layers, got {len(spec)}")
        stride_prod = 1
        for layer in spec:
            if len(layer) != 3 or any(int(v) <= 0 for v in layer):
                raise ConfigError(f"bad conv1d layer descriptor {layer}")
            stride_prod *= int(layer[2])
        if stride_prod != 8:
            raise ConfigError(f"conv1d strides must multiply to 8, got {stride_prod}")
        if spec[-1][0] != self.d:
            raise ConfigError(f"last conv1d channels must equal d={self.d}, got {spec[-1][0]}")
        if self.cnn2d_blocks < 1:
            raise ConfigError("cnn2d_blocks must be >= 1")
        if self.gru_layers < 1:
            raise ConfigError("gru_layers must be >= 1")


@dataclass
class AlignConfig:
    """Point-to-spatial alignment settings and the four ablation toggles.

    All toggles off removes the module entirely (baseline single-stream
    trajectory encoder); use_transformer controls whether the module has
    any parameters at all.
    """

    layers: int = 3
    heads: int = 8
    ff_mult: int = 2
    rope_base: float = 10000.0
    use_transformer: bool = True
    use_rope: bool = True
    use_align_loss: bool = True
    use_stop_gradient: bool = True

    @property
    def enabled(self) -> bool:
        return self.use_transformer or self.use_rope or self.use_align_loss

    def validate(self, d: int) -> None:
        if self.layers < 1:
            raise ConfigError("alignment layers must be >= 1")
        if self.heads < 1 or d % (2 * self.heads) != 0:
            raise ConfigError(f"d={d} must be divisible by 2*heads={2 * self.heads}")
        if self.ff_mult < 1:
            raise ConfigError("ff_mult must be >= 1")
        if self.rope_base <= 1:
            raise ConfigError("rope_base must be > 1")


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 10
    max_steps: int | None = None
    lr_max: float = 2e-4
    lr_min: float = 2e-7
    align_weight: float = 2.0
    augment: bool = True
    augment_fraction: float = 0.2
    augment_magnitude: float = 1.0
    seed: int = 0
    grad_clip: float = 5.0
    val_fraction: float = 0.1
    max_decode_len: int = 256

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1 and self.max_steps is None:
            raise ConfigError("need epochs >= 1 or max_steps")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not (self.lr_max >= self.lr_min > 0):
            raise ConfigError(f"need lr_max >= lr_min > 0, got {self.lr_max}, {self.lr_min}")
        if self.align_weight < 0:
            raise ConfigError("align_weight must be >= 0")
        if not 0.0 <= self.augment_fraction <= 1.0:
            raise ConfigError("augment_fraction must be in [0, 1]")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in [0, 1)")
        if self.max_decode_len < 1:
            raise ConfigError("max_decode_len must be >= 1")


@dataclass
class RunConfig:
    """Full configuration document for one experiment."""

    train_data: str | None = None
    val_data: str | None = None
    out_dir: str | None = None
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    alignment: AlignConfig = field(default_factory=AlignConfig)
    training: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        self.encoder.validate()
        self.alignment.validate(self.encoder.d)
        self.training.validate()


def _from_dict(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**{f.name: raw[f.name] for f in dataclasses.fields(cls) if f.name in raw})


def encoder_config_from_dict(raw: dict) -> EncoderConfig:
    return _from_dict(EncoderConfig, raw, "encoder")


def align_config_from_dict(raw: dict) -> AlignConfig:
    return _from_dict(AlignConfig, raw, "alignment")


def train_config_from_dict(raw: dict) -> TrainConfig:
    return _from_dict(TrainConfig, raw, "training")


def run_config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = set(raw) - {f.name for f in dataclasses.fields(RunConfig)}
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    cfg = RunConfig(
        train_data=raw.get("train_data"),
        val_data=raw.get("val_data"),
        out_dir=raw.get("out_dir"),
        encoder=encoder_config_from_dict(raw.get("encoder", {})),
        alignment=align_config_from_dict(raw.get("alignment", {})),
        training=train_config_from_dict(raw.get("training", {})),
    )
    cfg.validate()
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e.msg})") from e
    return run_config_from_dict(raw)


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)
