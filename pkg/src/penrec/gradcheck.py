"""Finite-difference gradient checking for the engine and its composites.

`check` compares reverse-mode gradients against central differences on a
probed subset of elements, in float64 (float32 differencing is too noisy
for tight tolerances). `standard_battery` enumerates every kernel plus the
composite blocks the model is built from; the test suite and the acceptance
gate both run it.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .config import AlignConfig, EncoderConfig
from .data import EOS, TrajectorySequence, Vocabulary, normalize
from .decoder import AttentionDecoder
from .model import Recognizer
from .layers import GRUCell, BiGRULayer, ParamStore, TransformerLayer

F64 = np.float64


def numeric_grad_at(f, arr: DiffArray, index, h: float = 1e-5) -> float:
    flat = arr.data.reshape(-1)
    orig = flat[index]
    flat[index] = orig + h
    hi = float(f().data)
    flat[index] = orig - h
    lo = float(f().data)
    flat[index] = orig
    return (hi - lo) / (2.0 * h)


def check(f, wrt, rng: np.random.Generator, probes: int = 4, h: float = 1e-5) -> float:
    """Max relative error between analytic and numeric grads over probes.

    Relative error uses denominator max(1, |analytic|, |numeric|) so
    near-zero gradients are compared absolutely.
    """
    loss = f()
    if loss.data.dtype != F64:
        raise ValueError("gradient checks must run in float64")
    ad.zero_grads(wrt)
    ad.backward(loss)
    worst = 0.0
    for arr in wrt:
        grad = np.zeros_like(arr.data) if arr.grad is None else arr.grad
        size = arr.data.size
        if size <= probes:
            idxs = np.arange(size)
        else:
            idxs = rng.choice(size, size=probes, replace=False)
        for index in idxs:
            a = float(grad.reshape(-1)[index])
            n = numeric_grad_at(f, arr, int(index), h)
            rel = abs(a - n) / max(1.0, abs(a), abs(n))
            worst = max(worst, rel)
    return worst


def _rand(rng, shape, lo=-1.0, hi=1.0):
    return ad.array(rng.uniform(lo, hi, size=shape), requires_grad=True, dtype=F64)


def _rand_away_from_zero(rng, shape, margin=0.2):
    # keeps relu/abs kinks farther than the differencing step
    mag = rng.uniform(margin, 1.0, size=shape)
    sign = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return ad.array(mag * sign, requires_grad=True, dtype=F64)


def fixed_projector(rng):
    """Scalarize with a random projection so upstream grads are non-uniform.

    The weights are drawn once per output shape and cached, so repeated
    forward calls (as finite differencing needs) see the same loss.
    """
    cache: dict[tuple, DiffArray] = {}

    def project(y: DiffArray) -> DiffArray:
        w = cache.get(y.shape)
        if w is None:
            w = ad.array(rng.normal(size=y.shape), dtype=F64)
            cache[y.shape] = w
        return ad.asum(ad.mul(y, w))

    return project


def kernel_cases(rng: np.random.Generator):
    """(name, loss_fn, wrt) triples covering every differentiable kernel."""
    proj = fixed_projector(rng)

    def unary(op, shape, away=False):
        a = (_rand_away_from_zero if away else _rand)(rng, shape)
        p = fixed_projector(rng)
        return lambda: p(op(a)), [a]

    def binary(op, a_shape, b_shape):
        a = _rand(rng, a_shape)
        b = _rand(rng, b_shape)
        p = fixed_projector(rng)
        return lambda: p(op(a, b)), [a, b]

    def conv1d_case(stride, pad):
        x, w, b = _rand(rng, (12, 3)), _rand(rng, (3, 3, 4)), _rand(rng, (4,))
        p = fixed_projector(rng)
        return lambda: p(ad.conv1d(x, w, b, stride=stride, pad=pad)), [x, w, b]

    def conv2d_case(stride, pad):
        x, w, b = _rand(rng, (8, 10, 2)), _rand(rng, (3, 3, 2, 3)), _rand(rng, (3,))
        p = fixed_projector(rng)
        return lambda: p(ad.conv2d(x, w, b, stride=stride, pad=pad)), [x, w, b]

    def layer_norm_case():
        x, g, b = _rand(rng, (4, 6)), _rand(rng, (6,), 0.5, 1.5), _rand(rng, (6,))
        return lambda: proj(ad.layer_norm(x, g, b)), [x, g, b]

    def concat_case(axis):
        abc = [_rand(rng, (3, 4)) for _ in range(3)]
        p = fixed_projector(rng)
        return lambda: p(ad.concat(abc, axis=axis)), abc

    def gather_case():
        table = _rand(rng, (7, 5))
        ids = rng.integers(0, 7, size=6)
        p = fixed_projector(rng)
        return lambda: p(ad.gather_rows(table, ids)), [table]

    def interp_case():
        feat = _rand(rng, (6, 4))
        # out-of-range included (clamped); nudged off integers so the
        # floor/frac split is stable under the differencing step
        pos = rng.uniform(-1.5, 7.5, size=9)
        pos += np.where(np.abs(pos - np.round(pos)) < 1e-3, 0.01, 0.0)
        p = fixed_projector(rng)
        return lambda: p(ad.interp_rows(feat, pos)), [feat]

    def ce_case():
        logits = _rand(rng, (5, 7))
        targets = rng.integers(0, 7, size=5)
        return lambda: ad.cross_entropy_logits(logits, targets), [logits]

    def mse_case():
        a, b = _rand(rng, (4, 5)), _rand(rng, (4, 5))
        return lambda: ad.mse(a, b), [a, b]

    return [
        ("add_same", *binary(ad.add, (3, 4), (3, 4))),
        ("add_bias", *binary(ad.add, (3, 4), (4,))),
        ("add_scalar_const", *unary(lambda a: ad.add(a, 0.7), (3, 4))),
        ("sub", *binary(ad.sub, (5,), (5,))),
        ("mul", *binary(ad.mul, (2, 3), (2, 3))),
        ("mul_scalar_const", *unary(lambda a: ad.mul(a, -1.3), (2, 3))),
        ("matmul", *binary(ad.matmul, (3, 4), (4, 2))),
        ("matmul_transpose_b", *binary(lambda a, b: ad.matmul(a, b, transpose_b=True), (3, 4), (5, 4))),
        ("sigmoid", *unary(ad.sigmoid, (4, 3))),
        ("tanh", *unary(ad.tanh, (4, 3))),
        ("relu", *unary(ad.relu, (4, 5), away=True)),
        ("softmax", *unary(ad.softmax, (3, 6))),
        ("mean", *unary(ad.amean, (3, 4))),
        ("sum", *unary(ad.asum, (3, 4))),
        ("conv1d_s1_p0", *conv1d_case(1, 0)),
        ("conv1d_s2_p1", *conv1d_case(2, 1)),
        ("conv2d_s11_p11", *conv2d_case((1, 1), (1, 1))),
        ("conv2d_s21_p11", *conv2d_case((2, 1), (1, 1))),
        ("conv2d_s22_p00", *conv2d_case((2, 2), (0, 0))),
        ("layer_norm", *layer_norm_case()),
        ("concat_axis0", *concat_case(0)),
        ("concat_axis1", *concat_case(1)),
        ("gather_rows", *gather_case()),
        ("squeeze_lead", *unary(ad.squeeze_lead, (1, 4, 3))),
        ("interp_rows", *interp_case()),
        ("cross_entropy_logits", *ce_case()),
        ("mse", *mse_case()),
    ]


def composite_cases(rng: np.random.Generator):
    """Gradient checks through the model's composite blocks."""
    cases = []

    def conv_block():
        store = ParamStore(rng, dtype=F64)
        from .encoders import Conv1dStack
        stack = Conv1dStack(store, "blk", 3, [[4, 3, 1], [4, 3, 2]])
        x = _rand(rng, (8, 3))
        wrt = [x] + list(store.params.values())
        p = fixed_projector(rng)
        return lambda: p(stack(x)), wrt

    cases.append(("conv1d_block", *conv_block()))

    def gru_step():
        store = ParamStore(rng, dtype=F64)
        cell = GRUCell(store, "g", 5, 4)
        x = _rand(rng, (1, 5))
        h = _rand(rng, (1, 4))
        wrt = [x, h] + list(store.params.values())
        p = fixed_projector(rng)
        return lambda: p(cell.step(x, h)), wrt

    cases.append(("gru_step", *gru_step()))

    def bigru_layer():
        store = ParamStore(rng, dtype=F64)
        layer = BiGRULayer(store, "bg", 4, 2)
        x = _rand(rng, (5, 4))
        wrt = [x] + list(store.params.values())
        p = fixed_projector(rng)
        return lambda: p(layer(x)), wrt

    cases.append(("bigru_layer", *bigru_layer()))

    def transformer_layer():
        store = ParamStore(rng, dtype=F64)
        layer = TransformerLayer(store, "tf", 8, heads=2, ff_width=16)
        x = _rand(rng, (5, 8))
        wrt = [x] + list(store.params.values())
        p = fixed_projector(rng)
        return lambda: p(layer(x)), wrt

    cases.append(("transformer_layer", *transformer_layer()))

    def decode_step():
        store = ParamStore(rng, dtype=F64)
        dec = AttentionDecoder(store, "dec", vocab_size=6, d=8)
        f_enc = _rand(rng, (4, 8))
        wrt = [f_enc] + list(store.params.values())
        p = fixed_projector(rng)

        def f():
            logits, _ = dec.step_logits(3, dec.initial_state(), f_enc)
            return p(logits)

        return f, wrt

    cases.append(("decode_step", *decode_step()))

    def ce_loss_composite():
        store = ParamStore(rng, dtype=F64)
        dec = AttentionDecoder(store, "dec", vocab_size=6, d=8)
        f_enc = _rand(rng, (4, 8))
        target = [3, 4, 5, EOS]
        wrt = [f_enc] + list(store.params.values())
        return lambda: dec.ce_loss(f_enc, target), wrt

    cases.append(("teacher_forced_ce", *ce_loss_composite()))

    def align_mse():
        a = _rand(rng, (5, 6))
        b = _rand(rng, (5, 6))
        from .alignment import align_loss
        return lambda: align_loss(a, b, stop_grad=False), [a, b]

    cases.append(("align_mse", *align_mse()))

    return cases


def tiny_model(dtype=F64, seed: int = 7, **align_overrides):
    """Smallest legal recognizer for whole-model checks (d=8)."""
    enc_cfg = EncoderConfig(
        d=8,
        conv1d_spec=[[8, 3, 1], [8, 3, 2], [8, 3, 1], [8, 3, 2], [8, 3, 1], [8, 3, 2]],
        cnn2d_blocks=1,
        gru_layers=1,
    )
    align_kwargs = dict(layers=1, heads=2, ff_mult=2)
    align_kwargs.update(align_overrides)
    align_cfg = AlignConfig(**align_kwargs)
    vocab = Vocabulary(list("abc"))
    return Recognizer(enc_cfg, align_cfg, vocab, seed=seed, dtype=dtype)


def tiny_sequence(rng: np.random.Generator, n_points: int = 24) -> TrajectorySequence:
    xs = np.linspace(0.0, 60.0, n_points) + rng.uniform(-1, 1, size=n_points)
    ys = 16.0 + 12.0 * np.sin(np.linspace(0, 3.0, n_points)) + rng.uniform(-1, 1, size=n_points)
    s = np.ones(n_points)
    s[n_points // 2] = 0.0
    pts = np.column_stack([xs, ys, s])
    return normalize(TrajectorySequence(id="t", points=pts, text="abc"))


def model_loss_cases(rng: np.random.Generator, params_per_group: int = 2):
    """The three training losses through the full tiny model.

    Differentiates w.r.t. a sampled parameter subset that touches every
    parameter group reachable by each loss.
    """
    model = tiny_model(seed=int(rng.integers(1 << 30)))
    seq = tiny_sequence(rng)

    def pick(prefixes):
        chosen = []
        for prefix in prefixes:
            names = sorted(n for n in model.params if n.startswith(prefix))
            take = [names[i] for i in rng.choice(len(names), size=min(params_per_group, len(names)), replace=False)]
            chosen.extend(model.params[n] for n in take)
        return chosen

    def loss_fn(key):
        def f():
            losses = model.sample_losses(seq)
            return losses[key]
        return f

    return [
        ("model_loss_traj", loss_fn("traj"), pick(("traj_conv.", "traj_gru.", "align.", "dec_traj."))),
        ("model_loss_img", loss_fn("img"), pick(("img_cnn.", "img_gru.", "dec_img."))),
        ("model_loss_align_no_sg", _align_no_sg(model, seq), pick(("traj_conv.", "align.", "img_cnn."))),
    ]


def _align_no_sg(model, seq):
    # differencing the align loss w.r.t. image params needs the stop
    # gradient off (its forward is an identity, so FD would see a slope
    # the analytic gradient correctly reports as zero)
    model.align_cfg.use_stop_gradient = False

    def f():
        return model.sample_losses(seq)["align"]

    return f


def standard_battery(seed: int = 0):
    """Every kernel and composite case, ready for `check`."""
    rng = np.random.default_rng(seed)
    cases = []
    cases.extend(kernel_cases(rng))
    cases.extend(composite_cases(rng))
    cases.extend(model_loss_cases(rng))
    return cases
