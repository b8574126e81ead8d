"""The two-stream recognizer.

Training runs the trajectory stream, the image stream, and the alignment
module together; inference touches only the trajectory stream and the
alignment module (parameter prefixes make that auditable).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .alignment import SpatialAligner, align_loss, merge_features, sample_image_columns
from .autodiff import DiffArray
from .config import AlignConfig, EncoderConfig
from .data import EOS, TrajectorySequence, Vocabulary, render
from .decoder import AttentionDecoder
from .encoders import FeatureSequence, ImageEncoder, TrajectoryEncoder, encode_image
from .layers import BiGRUStack, ParamStore

TRAJ_PREFIXES = ("traj_conv.", "traj_gru.", "align.", "dec_traj.")
IMAGE_PREFIXES = ("img_cnn.", "img_gru.", "dec_img.")


class Recognizer:
    def __init__(self, enc_cfg: EncoderConfig, align_cfg: AlignConfig,
                 vocab: Vocabulary, seed: int = 0, dtype=np.float32):
        enc_cfg.validate()
        align_cfg.validate(enc_cfg.d)
        self.enc_cfg = enc_cfg
        self.align_cfg = align_cfg
        self.vocab = vocab
        self.seed = seed
        self.store = ParamStore(np.random.default_rng(seed), dtype=dtype)
        d = enc_cfg.d
        self.traj_conv = TrajectoryEncoder(self.store, "traj_conv", enc_cfg)
        self.traj_gru = BiGRUStack(self.store, "traj_gru", d, enc_cfg.gru_layers)
        self.aligner = SpatialAligner(self.store, "align", d, align_cfg)
        self.img_cnn = ImageEncoder(self.store, "img_cnn", enc_cfg)
        self.img_gru = BiGRUStack(self.store, "img_gru", d, enc_cfg.gru_layers)
        self.dec_traj = AttentionDecoder(self.store, "dec_traj", vocab.size, d)
        self.dec_img = AttentionDecoder(self.store, "dec_img", vocab.size, d)

    @property
    def params(self) -> dict[str, DiffArray]:
        return self.store.params

    def param_groups(self) -> dict[str, dict[str, DiffArray]]:
        prefixes = TRAJ_PREFIXES + IMAGE_PREFIXES
        return {p.rstrip("."): self.store.group(p) for p in prefixes}

    # ----- trajectory stream -------------------------------------------------

    def trajectory_features(self, seq: TrajectorySequence) -> tuple[DiffArray, FeatureSequence, DiffArray | None]:
        """conv stack -> optional alignment -> merge -> BiGRU.

        Returns (encoded frames for the decoder, the conv FeatureSequence,
        and the aligned features or None when the module is disabled).
        """
        f_conv = self.traj_conv(seq)
        f_aligned = self.aligner(f_conv) if self.align_cfg.enabled else None
        f_enc = self.traj_gru(merge_features(f_conv.values, f_aligned))
        return f_enc, f_conv, f_aligned

    def infer_ids(self, seq: TrajectorySequence, max_len: int = 256) -> list[int]:
        """Single-stream inference; never touches image-stream parameters."""
        with ad.no_grad():
            f_enc, _, _ = self.trajectory_features(seq)
            return self.dec_traj.greedy(f_enc, max_len=max_len)

    def infer_text(self, seq: TrajectorySequence, max_len: int = 256) -> str:
        return self.vocab.decode(self.infer_ids(seq, max_len=max_len))

    # ----- collaborative training losses -------------------------------------

    def sample_losses(self, seq: TrajectorySequence) -> dict[str, DiffArray | None]:
        """Per-sample loss components on a normalized sequence."""
        target = self.vocab.encode(seq.text) + [EOS]
        f_enc, f_conv, f_aligned = self.trajectory_features(seq)
        loss_traj = self.dec_traj.ce_loss(f_enc, target)

        f2d_conv, f2d_gru = encode_image(self.img_cnn, self.img_gru, render(seq))
        loss_img = self.dec_img.ce_loss(f2d_gru.values, target)

        loss_align = None
        if self.align_cfg.use_align_loss and f_aligned is not None:
            sampled = sample_image_columns(f2d_conv.values, f_conv.positions)
            loss_align = align_loss(f_aligned, sampled,
                                    stop_grad=self.align_cfg.use_stop_gradient)
        return {"traj": loss_traj, "img": loss_img, "align": loss_align}
