"""Pen-trajectory data model.

A sample is an ordered sequence of (px, py, s) points with s=1 meaning the
pen touches the surface at that instant, plus a transcript. Normalization
maps the bounding box to the fixed 32-pixel image height; rendering draws
1-pixel Bresenham segments between consecutive touching samples (pen-up
points are kept in the signal but never rasterized).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_HEIGHT = 32

PAD, SOS, EOS = 0, 1, 2
RESERVED_SYMBOLS = ("\x00", "\x01", "\x02")


class DataError(ValueError):
    """Malformed dataset content."""


@dataclass
class TrajectorySequence:
    """Raw or normalized pen signal with its transcript.

    `points` is a (T, 3) float array of (px, py, s); s is 0 or 1.
    """

    id: str
    points: np.ndarray
    text: str

    @property
    def length(self) -> int:
        return self.points.shape[0]


def validate_sequence(seq: TrajectorySequence, where: str = "") -> None:
    pts = seq.points
    tag = f"{where}: " if where else ""
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DataError(f"{tag}points must be T x 3, got {pts.shape}")
    if pts.shape[0] < 2:
        raise DataError(f"{tag}need at least 2 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise DataError(f"{tag}non-finite coordinate")
    s = pts[:, 2]
    if not np.all((s == 0) | (s == 1)):
        raise DataError(f"{tag}pen state must be 0 or 1")


def load_dataset(path, require_text: bool = True) -> list[TrajectorySequence]:
    """Read a JSONL dataset: one {"id", "points", "text"} object per line."""
    path = Path(path)
    seqs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{where}: invalid JSON ({e.msg})") from e
            if not isinstance(rec, dict) or "id" not in rec or "points" not in rec:
                raise DataError(f"{where}: expected object with id/points/text fields")
            if require_text and "text" not in rec:
                raise DataError(f"{where}: missing text field")
            try:
                pts = np.asarray(rec["points"], dtype=np.float64)
            except (TypeError, ValueError) as e:
                raise DataError(f"{where}: bad points array") from e
            seq = TrajectorySequence(id=str(rec["id"]), points=pts, text=str(rec.get("text", "")))
            validate_sequence(seq, where)
            seqs.append(seq)
    if not seqs:
        raise DataError(f"{path}: empty dataset")
    return seqs


def save_dataset(path, seqs) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            rec = {
                "id": seq.id,
                "points": [[float(p[0]), float(p[1]), int(p[2])] for p in seq.points],
                "text": seq.text,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def normalize(seq: TrajectorySequence) -> TrajectorySequence:
    """Affinely map py to [0, 32]; px shares the scale factor, min px -> 0.

    Zero-height input falls back to scaling the width to 512 px with py
    centered at 16. Idempotent on already-normalized sequences.
    """
    validate_sequence(seq, seq.id)
    pts = seq.points
    px, py, s = pts[:, 0], pts[:, 1], pts[:, 2]
    height = py.max() - py.min()
    width = px.max() - px.min()
    if height > 0:
        scale = IMAGE_HEIGHT / height
        new_py = (py - py.min()) * scale
    else:
        scale = 512.0 / width if width > 0 else 1.0
        new_py = np.full_like(py, IMAGE_HEIGHT / 2.0)
    new_px = (px - px.min()) * scale
    out = np.column_stack([new_px, new_py, s])
    return TrajectorySequence(id=seq.id, points=out, text=seq.text)


def _point_pixels(points: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Rounded pixel coordinates, clamped into the image (py=32 -> row 31)."""
    cols = np.clip(np.rint(points[:, 0]).astype(int), 0, width - 1)
    rows = np.clip(np.rint(points[:, 1]).astype(int), 0, IMAGE_HEIGHT - 1)
    return rows, cols


def bresenham(r0: int, c0: int, r1: int, c1: int):
    """Integer line from (r0,c0) to (r1,c1), both endpoints included."""
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dc - dr
    while True:
        yield r0, c0
        if r0 == r1 and c0 == c1:
            return
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c0 += sc
        if e2 < dc:
            err += dc
            r0 += sr


def render_width(max_px: float) -> int:
    w = max(8, math.ceil(max_px) + 1)
    return ((w + 7) // 8) * 8


def render(seq: TrajectorySequence) -> np.ndarray:
    """Rasterize a normalized sequence to a (32, W) grayscale image.

    W is ceil(max px)+1 rounded up to a multiple of 8 (minimum 8). Segments
    are drawn only between consecutive touching samples; every touching
    sample also inks its own pixel, so isolated pen-down points stay visible.
    Ink is 1.0 on a 0.0 background, no anti-aliasing.
    """
    pts = seq.points
    width = render_width(pts[:, 0].max())
    img = np.zeros((IMAGE_HEIGHT, width), dtype=np.float32)
    rows, cols = _point_pixels(pts, width)
    down = pts[:, 2] == 1
    img[rows[down], cols[down]] = 1.0
    for t in range(1, pts.shape[0]):
        if pts[t - 1, 2] == 1 and pts[t, 2] == 1:
            for r, c in bresenham(rows[t - 1], cols[t - 1], rows[t], cols[t]):
                img[r, c] = 1.0
    return img


def augment(seq: TrajectorySequence, fraction: float, magnitude: float,
            rng: np.random.Generator) -> TrajectorySequence:
    """Perturb floor(fraction*T) randomly chosen pen-down points.

    Offsets are i.i.d. uniform in [-magnitude, +magnitude] per axis; pen
    states and point order are untouched and the result is re-normalized.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"augment: fraction must be in [0, 1], got {fraction}")
    pts = seq.points.copy()
    k = int(fraction * pts.shape[0])
    down = np.flatnonzero(pts[:, 2] == 1)
    k = min(k, down.size)
    if k > 0:
        chosen = rng.choice(down, size=k, replace=False)
        pts[chosen, :2] += rng.uniform(-magnitude, magnitude, size=(k, 2))
    return normalize(TrajectorySequence(id=seq.id, points=pts, text=seq.text))


class Vocabulary:
    """Dense character table with pad/sos/eos reserved at indices 0..2."""

    def __init__(self, chars):
        chars = list(chars)
        if len(set(chars)) != len(chars):
            raise DataError("vocabulary characters must be unique")
        for ch in chars:
            if ch in RESERVED_SYMBOLS:
                raise DataError("vocabulary cannot contain reserved control characters")
        self.symbols = list(RESERVED_SYMBOLS) + chars
        self._index = {ch: i for i, ch in enumerate(self.symbols)}

    @property
    def size(self) -> int:
        return len(self.symbols)

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as e:
            raise DataError(f"character {e.args[0]!r} not in vocabulary") from e

    def decode(self, ids) -> str:
        return "".join(self.symbols[i] for i in ids if i > EOS)

    def to_list(self) -> list[str]:
        return list(self.symbols)

    @classmethod
    def from_symbols(cls, symbols) -> "Vocabulary":
        symbols = list(symbols)
        if symbols[:3] != list(RESERVED_SYMBOLS):
            raise DataError("vocabulary list must start with the reserved symbols")
        return cls(symbols[3:])


def build_vocab(dataset) -> Vocabulary:
    """Sorted unique transcript characters behind the reserved tokens."""
    if not dataset:
        raise DataError("cannot build a vocabulary from an empty dataset")
    chars = set()
    for seq in dataset:
        for ch in seq.text:
            if ch in RESERVED_SYMBOLS:
                raise DataError(f"{seq.id}: transcript contains a reserved control character")
            chars.add(ch)
    return Vocabulary(sorted(chars))


def write_pgm(img: np.ndarray, path) -> None:
    """Binary PGM (P5, maxval 255); ink 1.0 maps to 255."""
    h, w = img.shape
    data = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
