"""Synthetic stroke-text generator.

Each symbol owns a fixed polyline glyph on the unit box (y grows downward,
like image rows). Glyphs are laid out left to right with small jitter, so
symbol identity stays recoverable from geometry and the recognition task is
learnable at desk scale.
"""

from __future__ import annotations

import numpy as np

from .data import TrajectorySequence

# Polyline strokes per symbol, unit box coordinates (x right, y down).
GLYPH_STROKES: dict[str, tuple[tuple[tuple[float, float], ...], ...]] = {
    "a": (((0.0, 1.0), (0.5, 0.0), (1.0, 1.0)), ((0.25, 0.55), (0.75, 0.55))),
    "b": (((0.0, 0.0), (0.0, 1.0)), ((0.0, 0.5), (1.0, 0.5), (1.0, 1.0), (0.0, 1.0))),
    "c": (((1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)),),
    "d": (((1.0, 0.0), (1.0, 1.0)), ((1.0, 0.5), (0.0, 0.5), (0.0, 1.0), (1.0, 1.0))),
    "e": (((1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)), ((0.0, 0.5), (0.7, 0.5))),
    "f": (((0.0, 1.0), (0.0, 0.0), (1.0, 0.0)), ((0.0, 0.5), (0.7, 0.5))),
    "g": (((1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.6), (0.55, 0.6)),),
    "h": (((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (1.0, 1.0)), ((0.0, 0.5), (1.0, 0.5))),
    "i": (((0.5, 0.0), (0.5, 1.0)), ((0.2, 0.0), (0.8, 0.0)), ((0.2, 1.0), (0.8, 1.0))),
    "j": (((1.0, 0.0), (1.0, 1.0), (0.4, 1.0), (0.0, 0.75)),),
    "k": (((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (0.0, 0.5), (1.0, 1.0))),
    "l": (((0.0, 0.0), (0.0, 1.0), (1.0, 1.0)),),
    "m": (((0.0, 1.0), (0.0, 0.0), (0.5, 0.6), (1.0, 0.0), (1.0, 1.0)),),
    "n": (((0.0, 1.0), (0.0, 0.0), (1.0, 1.0), (1.0, 0.0)),),
    "o": (((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)),),
    "p": (((0.0, 1.0), (0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.0, 0.5)),),
}

DEFAULT_ALPHABET = "abcdefghi"


def _resample(stroke, step: float) -> np.ndarray:
    """Subdivide a polyline so consecutive points are at most `step` apart."""
    verts = np.asarray(stroke, dtype=np.float64)
    out = [verts[0]]
    for a, b in zip(verts[:-1], verts[1:]):
        dist = float(np.hypot(*(b - a)))
        n = max(1, int(np.ceil(dist / step)))
        for i in range(1, n + 1):
            out.append(a + (b - a) * (i / n))
    return np.asarray(out)


def glyph_points(ch: str, step: float = 0.18) -> list[np.ndarray]:
    if ch not in GLYPH_STROKES:
        raise KeyError(f"no glyph template for {ch!r}")
    return [_resample(s, step) for s in GLYPH_STROKES[ch]]


def synth_generate(alphabet: str, n: int, rng: np.random.Generator,
                   length_range: tuple[int, int] = (2, 4),
                   glyph_size: float = 24.0, advance: float = 1.2,
                   glyph_jitter: float = 0.05, point_jitter: float = 0.012,
                   id_prefix: str = "synth") -> list[TrajectorySequence]:
    """Generate `n` sequences with uniform random transcripts over `alphabet`.

    Each stroke is preceded by a pen-up travel point at its start, so
    rendering never connects strokes or glyphs.
    """
    for ch in alphabet:
        if ch not in GLYPH_STROKES:
            raise KeyError(f"no glyph template for {ch!r}")
    lo, hi = length_range
    if not 1 <= lo <= hi:
        raise ValueError(f"bad length range {length_range}")
    symbols = list(alphabet)
    out = []
    for i in range(n):
        length = int(rng.integers(lo, hi + 1))
        chars = [symbols[int(j)] for j in rng.integers(0, len(symbols), size=length)]
        rows = []
        for k, ch in enumerate(chars):
            ox = (k * advance + rng.uniform(-glyph_jitter, glyph_jitter)) * glyph_size
            oy = rng.uniform(-glyph_jitter, glyph_jitter) * glyph_size
            for stroke in glyph_points(ch):
                pts = stroke * glyph_size
                pts = pts + rng.normal(0.0, point_jitter * glyph_size, size=pts.shape)
                pts[:, 0] += ox
                pts[:, 1] += oy
                rows.append([pts[0, 0], pts[0, 1], 0.0])
                for p in pts:
                    rows.append([p[0], p[1], 1.0])
        out.append(TrajectorySequence(id=f"{id_prefix}-{i:06d}",
                                      points=np.asarray(rows, dtype=np.float64),
                                      text="".join(chars)))
    return out
