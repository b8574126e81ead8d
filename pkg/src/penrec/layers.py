"""Parameter store and the recurrent/attention building blocks.

Every learnable array is registered under a dotted name whose first segment
identifies its stream ("traj_conv", "img_cnn", "dec_traj", ...); gradient
flow audits, checkpoint manifests, and the inference-isolation checks all
key off those prefixes.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray


class ParamStore:
    """Registry of named parameters, created in deterministic order."""

    def __init__(self, rng: np.random.Generator, dtype=np.float32):
        self.rng = rng
        self.dtype = dtype
        self.params: dict[str, DiffArray] = {}

    def new(self, name: str, shape: tuple, init: str = "glorot") -> DiffArray:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name}")
        if init == "zeros":
            values = np.zeros(shape)
        elif init == "ones":
            values = np.ones(shape)
        elif init == "he":
            fan_in = int(np.prod(shape[:-1])) or 1
            values = self.rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        elif init == "glorot":
            fan_in = int(np.prod(shape[:-1])) or 1
            limit = math.sqrt(6.0 / (fan_in + shape[-1]))
            values = self.rng.uniform(-limit, limit, size=shape)
        elif init.startswith("uniform:"):
            bound = float(init.split(":", 1)[1])
            values = self.rng.uniform(-bound, bound, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        p = ad.array(values, requires_grad=True, dtype=self.dtype)
        self.params[name] = p
        return p

    def group(self, prefix: str) -> dict[str, DiffArray]:
        return {n: p for n, p in self.params.items() if n.startswith(prefix)}

    def zeros_like_const(self, shape) -> DiffArray:
        return ad.array(np.zeros(shape), dtype=self.dtype)

    def const(self, values) -> DiffArray:
        return ad.array(values, dtype=self.dtype)


class Linear:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 bias: bool = True, init: str = "glorot"):
        self.w = store.new(f"{name}.w", (d_in, d_out), init)
        self.b = store.new(f"{name}.b", (d_out,), "zeros") if bias else None

    def __call__(self, x: DiffArray) -> DiffArray:
        y = ad.matmul(x, self.w)
        return ad.add(y, self.b) if self.b is not None else y


class GRUCell:
    """Standard gated recurrent cell; separate input/hidden gate weights."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_hidden: int):
        self.d_hidden = d_hidden
        u = f"uniform:{1.0 / math.sqrt(d_hidden)}"
        self.wxr = store.new(f"{name}.wxr", (d_in, d_hidden), u)
        self.wxz = store.new(f"{name}.wxz", (d_in, d_hidden), u)
        self.wxn = store.new(f"{name}.wxn", (d_in, d_hidden), u)
        self.whr = store.new(f"{name}.whr", (d_hidden, d_hidden), u)
        self.whz = store.new(f"{name}.whz", (d_hidden, d_hidden), u)
        self.whn = store.new(f"{name}.whn", (d_hidden, d_hidden), u)
        self.bxr = store.new(f"{name}.bxr", (d_hidden,), "zeros")
        self.bxz = store.new(f"{name}.bxz", (d_hidden,), "zeros")
        self.bxn = store.new(f"{name}.bxn", (d_hidden,), "zeros")
        self.bhr = store.new(f"{name}.bhr", (d_hidden,), "zeros")
        self.bhz = store.new(f"{name}.bhz", (d_hidden,), "zeros")
        self.bhn = store.new(f"{name}.bhn", (d_hidden,), "zeros")

    def input_projections(self, xs: DiffArray) -> tuple[DiffArray, DiffArray, DiffArray]:
        """Input-side gate projections for a whole sequence at once."""
        return (ad.add(ad.matmul(xs, self.wxr), self.bxr),
                ad.add(ad.matmul(xs, self.wxz), self.bxz),
                ad.add(ad.matmul(xs, self.wxn), self.bxn))

    def step_projected(self, pr: DiffArray, pz: DiffArray, pn: DiffArray,
                       h: DiffArray) -> DiffArray:
        r = ad.sigmoid(ad.add(pr, ad.add(ad.matmul(h, self.whr), self.bhr)))
        z = ad.sigmoid(ad.add(pz, ad.add(ad.matmul(h, self.whz), self.bhz)))
        n = ad.tanh(ad.add(pn, ad.mul(r, ad.add(ad.matmul(h, self.whn), self.bhn))))
        # h' = (1 - z) * n + z * h
        return ad.add(n, ad.mul(z, ad.sub(h, n)))

    def step(self, x: DiffArray, h: DiffArray) -> DiffArray:
        pr, pz, pn = self.input_projections(x)
        return self.step_projected(pr, pz, pn, h)


class BiGRULayer:
    """One bidirectional layer; directional outputs are concatenated."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_hidden: int):
        self.store = store
        self.d_hidden = d_hidden
        self.fwd = GRUCell(store, f"{name}.fwd", d_in, d_hidden)
        self.bwd = GRUCell(store, f"{name}.bwd", d_in, d_hidden)

    def _run(self, cell: GRUCell, xs: DiffArray, order) -> list[DiffArray]:
        pr, pz, pn = cell.input_projections(xs)
        h = self.store.zeros_like_const((1, self.d_hidden))
        outs = []
        for t in order:
            h = cell.step_projected(ad.gather_rows(pr, [t]), ad.gather_rows(pz, [t]),
                                    ad.gather_rows(pn, [t]), h)
            outs.append(h)
        return outs

    def __call__(self, xs: DiffArray) -> DiffArray:
        frames = xs.shape[0]
        out_f = self._run(self.fwd, xs, range(frames))
        out_b = self._run(self.bwd, xs, range(frames - 1, -1, -1))[::-1]
        return ad.concat([ad.concat(out_f, axis=0), ad.concat(out_b, axis=0)], axis=1)


class BiGRUStack:
    """`layers` bidirectional layers, width d in and out (hidden d/2 each way)."""

    def __init__(self, store: ParamStore, name: str, d: int, layers: int):
        if d % 2 != 0:
            raise ValueError(f"BiGRU width must be even, got {d}")
        self.layers = [BiGRULayer(store, f"{name}.l{i}", d, d // 2) for i in range(layers)]

    def __call__(self, xs: DiffArray) -> DiffArray:
        for layer in self.layers:
            xs = layer(xs)
        return xs


class TransformerLayer:
    """Pre-norm encoder layer: multi-head self-attention plus feed-forward.

    Heads carry separate q/k/v projection matrices so the engine never needs
    a reshape kernel; outputs are concatenated and mixed by one projection.
    """

    def __init__(self, store: ParamStore, name: str, d: int, heads: int, ff_width: int):
        if d % heads != 0:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.d = d
        self.heads = heads
        self.head_dim = d // heads
        self.scale = 1.0 / math.sqrt(self.head_dim)
        self.ln1_g = store.new(f"{name}.ln1.g", (d,), "ones")
        self.ln1_b = store.new(f"{name}.ln1.b", (d,), "zeros")
        self.ln2_g = store.new(f"{name}.ln2.g", (d,), "ones")
        self.ln2_b = store.new(f"{name}.ln2.b", (d,), "zeros")
        self.wq = [store.new(f"{name}.attn.h{j}.wq", (d, self.head_dim), "glorot") for j in range(heads)]
        self.wk = [store.new(f"{name}.attn.h{j}.wk", (d, self.head_dim), "glorot") for j in range(heads)]
        self.wv = [store.new(f"{name}.attn.h{j}.wv", (d, self.head_dim), "glorot") for j in range(heads)]
        self.out = Linear(store, f"{name}.attn.out", d, d)
        self.ff1 = Linear(store, f"{name}.ff1", d, ff_width)
        self.ff2 = Linear(store, f"{name}.ff2", ff_width, d)

    def __call__(self, x: DiffArray, attn_sink: list | None = None) -> DiffArray:
        h = ad.layer_norm(x, self.ln1_g, self.ln1_b)
        ctx = []
        for j in range(self.heads):
            q = ad.matmul(h, self.wq[j])
            k = ad.matmul(h, self.wk[j])
            v = ad.matmul(h, self.wv[j])
            scores = ad.mul(ad.matmul(q, k, transpose_b=True), self.scale)
            alpha = ad.softmax(scores)
            if attn_sink is not None:
                attn_sink.append(alpha.data.copy())
            ctx.append(ad.matmul(alpha, v))
        x = ad.add(x, self.out(ad.concat(ctx, axis=1)))
        h2 = ad.layer_norm(x, self.ln2_g, self.ln2_b)
        return ad.add(x, self.ff2(ad.relu(self.ff1(h2))))
