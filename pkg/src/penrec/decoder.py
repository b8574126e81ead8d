"""Attention-based autoregressive GRU decoder, one code path for both streams.

Each step embeds the previous token, attends over the encoded frames with a
single-head scaled dot-product query (learned q/k projections, raw values),
advances a GRU cell, and projects to vocabulary logits. Training uses
teacher forcing; inference is greedy.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .data import EOS, SOS
from .layers import GRUCell, Linear, ParamStore


class AttentionDecoder:
    def __init__(self, store: ParamStore, name: str, vocab_size: int, d: int):
        self.store = store
        self.vocab_size = vocab_size
        self.d = d
        self.scale = 1.0 / math.sqrt(d)
        self.embed = store.new(f"{name}.embed", (vocab_size, d), f"uniform:{1.0 / math.sqrt(d)}")
        self.wq = store.new(f"{name}.wq", (d, d), "glorot")
        self.wk = store.new(f"{name}.wk", (d, d), "glorot")
        self.gru = GRUCell(store, f"{name}.gru", d, d)
        self.out = Linear(store, f"{name}.out", d, vocab_size)

    def initial_state(self) -> DiffArray:
        return self.store.zeros_like_const((1, self.d))

    def step_logits(self, prev_token: int, state: DiffArray, f_enc: DiffArray,
                    attn_sink: list | None = None) -> tuple[DiffArray, DiffArray]:
        if not 0 <= prev_token < self.vocab_size:
            raise ValueError(f"token {prev_token} out of vocabulary (size {self.vocab_size})")
        if f_enc.shape[0] < 1:
            raise ValueError("decoder needs a nonempty encoded sequence")
        y = ad.gather_rows(self.embed, [prev_token])
        q = ad.matmul(ad.add(y, state), self.wq)
        k = ad.matmul(f_enc, self.wk)
        scores = ad.mul(ad.matmul(q, k, transpose_b=True), self.scale)
        alpha = ad.softmax(scores)
        if attn_sink is not None:
            attn_sink.append(alpha.data.copy())
        attended = ad.matmul(alpha, f_enc)
        new_state = self.gru.step(ad.add(y, attended), state)
        logits = self.out(new_state)
        return logits, new_state

    def step(self, prev_token: int, state: DiffArray, f_enc: DiffArray) -> tuple[DiffArray, DiffArray]:
        """One decode step returning (probabilities, new state)."""
        logits, new_state = self.step_logits(prev_token, state, f_enc)
        return ad.softmax(logits), new_state

    def greedy(self, f_enc: DiffArray, max_len: int = 256) -> list[int]:
        """Greedy decode from sos; stops at eos or max_len; reserved tokens excluded."""
        if max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {max_len}")
        state = self.initial_state()
        prev = SOS
        out: list[int] = []
        with ad.no_grad():
            for _ in range(max_len):
                probs, state = self.step(prev, state, f_enc)
                tok = int(np.argmax(probs.data[0]))
                if tok == EOS:
                    break
                out.append(tok)
                prev = tok
        return out

    def sequence_logits(self, f_enc: DiffArray, target_ids: list[int]) -> DiffArray:
        """Teacher-forced logits, one row per target position."""
        state = self.initial_state()
        prev = SOS
        rows = []
        for tok in target_ids:
            logits, state = self.step_logits(prev, state, f_enc)
            rows.append(logits)
            prev = tok
        return ad.concat(rows, axis=0)

    def ce_loss(self, f_enc: DiffArray, target_ids: list[int]) -> DiffArray:
        """Mean per-step cross entropy; targets must end with eos."""
        if not target_ids:
            raise ValueError("ce_loss: empty target")
        if target_ids[-1] != EOS:
            raise ValueError("ce_loss: target must end with eos")
        logits = self.sequence_logits(f_enc, target_ids)
        return ad.cross_entropy_logits(logits, target_ids)
