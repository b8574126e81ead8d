"""Point-to-spatial alignment: position-aware self-attention over trajectory
frames, point-level sampling of image columns, and the feature-matching loss.

The 2D position embedding is sinusoidal at rotary-style geometric
frequencies and is ADDED to the conv features (the first d/2 lanes encode
px, the last d/2 encode py). Sampling interpolates image-encoder columns at
each trajectory frame's pixel position; the loss pulls the aligned features
toward those (optionally gradient-stopped) samples.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .config import AlignConfig
from .encoders import FeatureSequence
from .layers import ParamStore, TransformerLayer

IMAGE_STRIDE_W = 8


def rope2d(positions: np.ndarray, d: int, base: float = 10000.0) -> np.ndarray:
    """Sinusoidal 2D embedding, (frames, 2) pixel positions -> (frames, d).

    Within each axis half, pair j holds (cos t, sin t) with
    t = pos / base**(j / (d/4)), so every pair has unit norm and changing
    one coordinate leaves the other axis's half bit-identical.
    """
    if d % 4 != 0:
        raise ValueError(f"embedding width must be divisible by 4, got {d}")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValueError(f"positions must be (frames, 2), got {positions.shape}")
    quarter = d // 4
    inv = base ** (-(np.arange(quarter) / quarter))
    out = np.empty((positions.shape[0], d), dtype=np.float64)
    for axis in range(2):
        ang = positions[:, axis:axis + 1] * inv[None, :]
        half = axis * (d // 2)
        out[:, half + 0:half + d // 2:2] = np.cos(ang)
        out[:, half + 1:half + d // 2:2] = np.sin(ang)
    return out


class SpatialAligner:
    """Maps point-level conv features toward image-level spatial features.

    With use_transformer off the module owns no parameters and forwards the
    (optionally position-tagged) input unchanged; with all toggles off the
    model skips it entirely.
    """

    def __init__(self, store: ParamStore, name: str, d: int, cfg: AlignConfig):
        self.store = store
        self.d = d
        self.cfg = cfg
        self.layers = []
        if cfg.use_transformer:
            for i in range(cfg.layers):
                self.layers.append(TransformerLayer(store, f"{name}.l{i}", d,
                                                    cfg.heads, cfg.ff_mult * d))

    def __call__(self, feat: FeatureSequence, attn_sink: list | None = None) -> DiffArray:
        if feat.positions is None:
            raise ValueError("spatial alignment needs trajectory frame positions")
        x = feat.values
        if self.cfg.use_rope:
            x = ad.add(x, self.store.const(rope2d(feat.positions, self.d, self.cfg.rope_base)))
        for layer in self.layers:
            x = layer(x, attn_sink=attn_sink)
        return x


def sample_image_columns(f2d_conv: DiffArray, positions: np.ndarray) -> DiffArray:
    """Point-level sampling of image-encoder columns at trajectory positions.

    Column coordinate is px / 8 (the image stack's width stride), clamped to
    the valid range; rows are linearly interpolated along the width axis and
    the result is differentiable w.r.t. the image features.
    """
    cols = np.asarray(positions, dtype=np.float64)[:, 0] / IMAGE_STRIDE_W
    return ad.interp_rows(f2d_conv, cols)


def align_loss(f_aligned: DiffArray, f_sampled: DiffArray, stop_grad: bool = True) -> DiffArray:
    """Mean squared error between aligned features and image samples.

    With stop_grad the image branch is a fixed target; without it the loss
    also backpropagates into the image encoder.
    """
    target = ad.stop_gradient(f_sampled) if stop_grad else f_sampled
    return ad.mse(f_aligned, target)


def merge_features(f_conv: DiffArray, f_aligned: DiffArray | None) -> DiffArray:
    """Elementwise sum feeding the trajectory BiGRU (identity when absent)."""
    if f_aligned is None:
        return f_conv
    return ad.add(f_conv, f_aligned)
