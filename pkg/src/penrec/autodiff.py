"""Reverse-mode differentiable array engine.

Exactly the kernel set the recognizer needs and nothing more: elementwise
arithmetic, matmul, strided 1D/2D convolution, the usual activations,
softmax, layer norm, concatenation, row gather, linear interpolation along
the leading axis, full reductions, and the two losses. Arrays are float32
by default; build everything in float64 for finite-difference checks.

Also hosts the optimizer pieces: Adam with bias correction and the cosine
learning-rate schedule.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np


class ShapeError(ValueError):
    """Kernel invoked with incompatible shapes."""


_GRAD_ENABLED = True
_VALIDATE = False


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference/eval path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def set_validation(flag: bool) -> None:
    """Toggle finiteness checks on kernel inputs (slow, for debugging)."""
    global _VALIDATE
    _VALIDATE = bool(flag)


class DiffArray:
    """N-dimensional array participating in reverse-mode differentiation.

    `parents` and `backward_fn` form the backward record; they are set only
    while gradients are enabled and some input requires them, so inference
    builds no graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is not None:
            data = np.asarray(data, dtype=dtype)
        else:
            data = np.asarray(data)
            if data.dtype not in (np.float32, np.float64):
                data = data.astype(np.float32)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self.parents: tuple = ()
        self.backward_fn = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"DiffArray(shape={self.data.shape}, op={self.op}, requires_grad={self.requires_grad})"


def array(data, requires_grad: bool = False, dtype=np.float32) -> DiffArray:
    return DiffArray(data, requires_grad=requires_grad, dtype=dtype)


def _check_finite(op: str, *xs: DiffArray) -> None:
    if _VALIDATE:
        for x in xs:
            if not np.all(np.isfinite(x.data)):
                raise ValueError(f"{op}: non-finite input")


def _make(data, parents, op, backward_fn) -> DiffArray:
    out = DiffArray(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
        out.op = op
    return out


def _acc(p: DiffArray, g) -> None:
    if p.requires_grad:
        if p.grad is None:
            p.grad = np.array(g, dtype=p.data.dtype)
            if p.grad.shape != p.data.shape:
                p.grad = np.broadcast_to(p.grad, p.data.shape).copy()
        else:
            p.grad += g


def backward(loss: DiffArray) -> None:
    """Populate grads of every reachable array that requires them.

    Gradients accumulate across multiple uses of the same array. Only a
    scalar-shaped loss is accepted.
    """
    if loss.data.shape != ():
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones((), dtype=loss.data.dtype)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


def zero_grads(arrays) -> None:
    for a in arrays:
        a.grad = None


def stop_gradient(x: DiffArray) -> DiffArray:
    """Forward identity that detaches the array from the graph."""
    return DiffArray(x.data)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _as_const(x, like: DiffArray) -> DiffArray:
    if isinstance(x, DiffArray):
        return x
    return DiffArray(np.asarray(x, dtype=like.dtype))


def add(a: DiffArray, b) -> DiffArray:
    """Elementwise add; the one allowed broadcast is a trailing-axis bias."""
    b = _as_const(b, a)
    _check_finite("add", a, b)
    if a.shape == b.shape or b.shape == ():
        bias = False
    elif b.data.ndim == 1 and a.data.ndim > 1 and a.shape[-1] == b.shape[0]:
        bias = True
    else:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    y = a.data + b.data

    def back(g):
        _acc(a, g)
        if bias:
            _acc(b, g.reshape(-1, b.shape[0]).sum(axis=0))
        elif b.shape == ():
            _acc(b, g.sum())
        else:
            _acc(b, g)

    return _make(y, (a, b), "add", back)


def sub(a: DiffArray, b) -> DiffArray:
    b = _as_const(b, a)
    _check_finite("sub", a, b)
    if a.shape != b.shape and b.shape != ():
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    y = a.data - b.data

    def back(g):
        _acc(a, g)
        _acc(b, -g.sum() if b.shape == () else -g)

    return _make(y, (a, b), "sub", back)


def mul(a: DiffArray, b) -> DiffArray:
    b = _as_const(b, a)
    _check_finite("mul", a, b)
    if a.shape != b.shape and b.shape != ():
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    y = a.data * b.data

    def back(g):
        _acc(a, g * b.data)
        gb = g * a.data
        _acc(b, gb.sum() if b.shape == () else gb)

    return _make(y, (a, b), "mul", back)


def matmul(a: DiffArray, b: DiffArray, transpose_b: bool = False) -> DiffArray:
    _check_finite("matmul", a, b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expects 2D operands, got {a.shape} and {b.shape}")
    inner_b = b.shape[1] if transpose_b else b.shape[0]
    if a.shape[1] != inner_b:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    y = a.data @ (b.data.T if transpose_b else b.data)

    def back(g):
        if transpose_b:
            _acc(a, g @ b.data)
            _acc(b, g.T @ a.data)
        else:
            _acc(a, g @ b.data.T)
            _acc(b, a.data.T @ g)

    return _make(y, (a, b), "matmul", back)


# ---------------------------------------------------------------------------
# convolutions


def conv1d_out_length(length: int, kernel: int, stride: int, pad: int) -> int:
    return (length + 2 * pad - kernel) // stride + 1


def conv1d(x: DiffArray, w: DiffArray, b: DiffArray | None, stride: int = 1, pad: int = 0) -> DiffArray:
    """Strided 1D convolution over a time-major (L, C_in) input.

    Weights are (K, C_in, C_out); output is (L_out, C_out) with
    L_out = floor((L + 2*pad - K) / stride) + 1.
    """
    _check_finite("conv1d", x, w)
    if x.data.ndim != 2 or w.data.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv1d: incompatible shapes {x.shape} and {w.shape}")
    L, cin = x.shape
    K, _, cout = w.shape
    lout = conv1d_out_length(L, K, stride, pad)
    if lout <= 0:
        raise ShapeError(f"conv1d: input shape {x.shape} too short for kernel {w.shape}")
    xp = np.pad(x.data, ((pad, pad), (0, 0))) if pad else x.data
    idx = (np.arange(lout) * stride)[:, None] + np.arange(K)[None, :]
    cols = xp[idx].reshape(lout, K * cin)
    w2 = w.data.reshape(K * cin, cout)
    y = cols @ w2
    if b is not None:
        if b.shape != (cout,):
            raise ShapeError(f"conv1d: incompatible shapes {b.shape} and {w.shape}")
        y = y + b.data

    parents = (x, w) if b is None else (x, w, b)

    def back(g):
        if w.requires_grad:
            _acc(w, (cols.T @ g).reshape(w.shape))
        if b is not None:
            _acc(b, g.sum(axis=0))
        if x.requires_grad:
            dcols = (g @ w2.T).reshape(lout * K, cin)
            dxp = np.zeros_like(xp)
            np.add.at(dxp, idx.ravel(), dcols)
            _acc(x, dxp[pad:pad + L] if pad else dxp)

    return _make(y, parents, "conv1d", back)


def conv2d(x: DiffArray, w: DiffArray, b: DiffArray | None,
           stride: tuple[int, int] = (1, 1), pad: tuple[int, int] = (0, 0)) -> DiffArray:
    """Strided 2D convolution over a channels-last (H, W, C_in) input.

    Weights are (KH, KW, C_in, C_out); output is (H_out, W_out, C_out).
    """
    _check_finite("conv2d", x, w)
    if x.data.ndim != 3 or w.data.ndim != 4 or x.shape[2] != w.shape[2]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {w.shape}")
    H, W, cin = x.shape
    kh, kw, _, cout = w.shape
    sh, sw = stride
    ph, pw = pad
    ho = (H + 2 * ph - kh) // sh + 1
    wo = (W + 2 * pw - kw) // sw + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d: input shape {x.shape} too small for kernel {w.shape}")
    xp = np.pad(x.data, ((ph, ph), (pw, pw), (0, 0))) if (ph or pw) else x.data
    wp = xp.shape[1]
    ri = (np.arange(ho) * sh)[:, None] + np.arange(kh)[None, :]          # (ho, kh)
    ci = (np.arange(wo) * sw)[:, None] + np.arange(kw)[None, :]          # (wo, kw)
    rows = ri[:, None, :, None]
    colsix = ci[None, :, None, :]
    patches = xp[rows, colsix]                                           # (ho, wo, kh, kw, cin)
    cols = patches.reshape(ho * wo, kh * kw * cin)
    w2 = w.data.reshape(kh * kw * cin, cout)
    y = (cols @ w2).reshape(ho, wo, cout)
    if b is not None:
        if b.shape != (cout,):
            raise ShapeError(f"conv2d: incompatible shapes {b.shape} and {w.shape}")
        y = y + b.data

    parents = (x, w) if b is None else (x, w, b)

    def back(g):
        g2 = g.reshape(ho * wo, cout)
        if w.requires_grad:
            _acc(w, (cols.T @ g2).reshape(w.shape))
        if b is not None:
            _acc(b, g2.sum(axis=0))
        if x.requires_grad:
            dcols = (g2 @ w2.T).reshape(ho, wo, kh, kw, cin)
            flat = rows * wp + colsix                                     # (ho, wo, kh, kw)
            dxp = np.zeros((xp.shape[0] * wp, cin), dtype=xp.dtype)
            np.add.at(dxp, flat.ravel(), dcols.reshape(-1, cin))
            dxp = dxp.reshape(xp.shape)
            _acc(x, dxp[ph:ph + H, pw:pw + W] if (ph or pw) else dxp)

    return _make(y, parents, "conv2d", back)


# ---------------------------------------------------------------------------
# activations and normalization


def sigmoid(x: DiffArray) -> DiffArray:
    _check_finite("sigmoid", x)
    # overflow-safe form of 1 / (1 + exp(-x))
    y = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def back(g):
        _acc(x, g * y * (1.0 - y))

    return _make(y, (x,), "sigmoid", back)


def tanh(x: DiffArray) -> DiffArray:
    _check_finite("tanh", x)
    y = np.tanh(x.data)

    def back(g):
        _acc(x, g * (1.0 - y * y))

    return _make(y, (x,), "tanh", back)


def relu(x: DiffArray) -> DiffArray:
    _check_finite("relu", x)
    y = np.maximum(x.data, 0)

    def back(g):
        _acc(x, g * (x.data > 0))

    return _make(y, (x,), "relu", back)


def softmax(x: DiffArray) -> DiffArray:
    """Softmax along the last axis."""
    _check_finite("softmax", x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        _acc(x, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _make(y, (x,), "softmax", back)


def layer_norm(x: DiffArray, gain: DiffArray, bias: DiffArray, eps: float = 1e-5) -> DiffArray:
    """Normalize over the last axis, then scale and shift."""
    _check_finite("layer_norm", x, gain, bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: incompatible shapes {x.shape} and {gain.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = xc * inv
    y = xh * gain.data + bias.data

    def back(g):
        _acc(gain, (g * xh).reshape(-1, d).sum(axis=0))
        _acc(bias, g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            dxh = g * gain.data
            term = dxh - dxh.mean(axis=-1, keepdims=True) - xh * (dxh * xh).mean(axis=-1, keepdims=True)
            _acc(x, inv * term)

    return _make(y, (x, gain, bias), "layer_norm", back)


# ---------------------------------------------------------------------------
# structure: concat, gather, squeeze, interpolation


def concat(arrays, axis: int = 0) -> DiffArray:
    arrays = list(arrays)
    if not arrays:
        raise ShapeError("concat: empty input list")
    y = np.concatenate([a.data for a in arrays], axis=axis)
    sizes = [a.shape[axis] for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for a, lo, hi in zip(arrays, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _acc(a, g[tuple(sl)])

    return _make(y, tuple(arrays), "concat", back)


def gather_rows(table: DiffArray, ids) -> DiffArray:
    """Row lookup (embedding): table (V, d), integer ids (L,) -> (L, d)."""
    _check_finite("gather_rows", table)
    ids = np.asarray(ids, dtype=np.intp)
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows: table must be 2D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"gather_rows: index out of range for table {table.shape}")
    y = table.data[ids]

    def back(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids, g)
        _acc(table, dt)

    return _make(y, (table,), "gather_rows", back)


def squeeze_lead(x: DiffArray) -> DiffArray:
    """Drop a leading axis of extent 1 (layout view, identity values)."""
    if x.shape[0] != 1:
        raise ShapeError(f"squeeze_lead: leading extent must be 1, got {x.shape}")
    y = x.data.reshape(x.shape[1:])

    def back(g):
        _acc(x, g.reshape(x.shape))

    return _make(y, (x,), "squeeze_lead", back)


def interp_rows(feat: DiffArray, positions) -> DiffArray:
    """Linear interpolation along axis 0 at fractional row coordinates.

    `positions` (M,) are clamped to [0, N-1]; each output row mixes the two
    bracketing feature rows. Differentiable w.r.t. `feat` only.
    """
    _check_finite("interp_rows", feat)
    if feat.data.ndim != 2:
        raise ShapeError(f"interp_rows: features must be 2D, got {feat.shape}")
    n = feat.shape[0]
    pos = np.asarray(positions, dtype=feat.dtype).reshape(-1)
    c = np.clip(pos, 0.0, float(n - 1))
    i0 = np.floor(c).astype(np.intp)
    frac = (c - i0).astype(feat.dtype)
    i1 = np.minimum(i0 + 1, n - 1)
    w0 = (1.0 - frac)[:, None].astype(feat.dtype)
    w1 = frac[:, None]
    y = w0 * feat.data[i0] + w1 * feat.data[i1]

    def back(g):
        df = np.zeros_like(feat.data)
        np.add.at(df, i0, w0 * g)
        np.add.at(df, i1, w1 * g)
        _acc(feat, df)

    return _make(y, (feat,), "interp_rows", back)


# ---------------------------------------------------------------------------
# reductions and losses


def asum(x: DiffArray) -> DiffArray:
    _check_finite("sum", x)
    y = x.data.sum()

    def back(g):
        _acc(x, np.full(x.shape, g, dtype=x.dtype))

    return _make(y, (x,), "sum", back)


def amean(x: DiffArray) -> DiffArray:
    _check_finite("mean", x)
    y = x.data.mean()
    inv = 1.0 / x.data.size

    def back(g):
        _acc(x, np.full(x.shape, g * inv, dtype=x.dtype))

    return _make(y, (x,), "mean", back)


def cross_entropy_logits(logits: DiffArray, targets) -> DiffArray:
    """Mean over rows of -log softmax(logits)[target]; stable log-sum-exp."""
    _check_finite("cross_entropy_logits", logits)
    t = np.asarray(targets, dtype=np.intp)
    if logits.data.ndim != 2 or t.ndim != 1 or t.shape[0] != logits.shape[0]:
        raise ShapeError(f"cross_entropy_logits: incompatible shapes {logits.shape} and {t.shape}")
    if t.size == 0:
        raise ShapeError("cross_entropy_logits: empty target")
    L = logits.shape[0]
    m = logits.data.max(axis=-1, keepdims=True)
    z = logits.data - m
    lse = np.log(np.exp(z).sum(axis=-1)) + m[:, 0]
    y = (lse - logits.data[np.arange(L), t]).mean()

    def back(g):
        p = np.exp(z)
        p /= p.sum(axis=-1, keepdims=True)
        p[np.arange(L), t] -= 1.0
        _acc(logits, (g / L) * p)

    return _make(y, (logits,), "cross_entropy_logits", back)


def mse(a: DiffArray, b: DiffArray) -> DiffArray:
    """Mean squared error over all elements."""
    _check_finite("mse", a, b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: incompatible shapes {a.shape} and {b.shape}")
    diff = a.data - b.data
    y = (diff * diff).mean()
    scale = 2.0 / diff.size

    def back(g):
        d = (g * scale) * diff
        _acc(a, d)
        _acc(b, -d)

    return _make(y, (a, b), "mse", back)


# ---------------------------------------------------------------------------
# optimizer


class AdamState:
    """Per-parameter first/second moment buffers plus the shared step count."""

    def __init__(self, params: dict, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.step = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}


def adam_step(params: dict, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update over `params` (name -> DiffArray).

    Missing grads count as zero. Any non-finite gradient rejects the whole
    step before touching parameters or state.
    """
    if lr <= 0:
        raise ValueError(f"adam_step: lr must be positive, got {lr}")
    grads = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"adam_step: grad shape {g.shape} does not match parameter '{name}' {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"adam_step: non-finite gradient for parameter '{name}'")
        grads[name] = g
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    state.step = t


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    """Cosine decay from lr_max at step 0 to lr_min at total_steps."""
    if not (lr_max >= lr_min > 0):
        raise ValueError(f"cosine_lr: need lr_max >= lr_min > 0, got {lr_max}, {lr_min}")
    if step < 0:
        raise ValueError(f"cosine_lr: negative step {step}")
    if step >= total_steps:
        return lr_min
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


def global_grad_norm(params: dict) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            g = p.grad.astype(np.float64, copy=False)
            total += float((g * g).sum())
    return math.sqrt(total)


def clip_grads(params: dict, max_norm: float) -> float:
    """Scale all grads so the global norm is at most max_norm; returns the norm."""
    norm = global_grad_norm(params)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm
