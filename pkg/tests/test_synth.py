"""Synthetic generator: validity, determinism, and geometric learnability."""

import numpy as np

from penrec import data as D
from penrec.synth import DEFAULT_ALPHABET, GLYPH_STROKES, synth_generate


def test_generate_zero_is_empty():
    assert synth_generate(DEFAULT_ALPHABET, 0, np.random.default_rng(0)) == []


def test_outputs_pass_sequence_validation():
    for seq in synth_generate(DEFAULT_ALPHABET, 20, np.random.default_rng(1)):
        D.validate_sequence(seq, seq.id)
        assert seq.text and all(ch in DEFAULT_ALPHABET for ch in seq.text)


def test_seeded_generation_is_deterministic():
    a = synth_generate(DEFAULT_ALPHABET, 5, np.random.default_rng(3))
    b = synth_generate(DEFAULT_ALPHABET, 5, np.random.default_rng(3))
    for x, y in zip(a, b):
        assert x.text == y.text
        np.testing.assert_array_equal(x.points, y.points)


def test_transcript_lengths_respect_range():
    seqs = synth_generate(DEFAULT_ALPHABET, 50, np.random.default_rng(4), length_range=(2, 4))
    assert all(2 <= len(s.text) <= 4 for s in seqs)


def test_all_glyphs_have_strokes():
    assert set(DEFAULT_ALPHABET) <= set(GLYPH_STROKES)
    for strokes in GLYPH_STROKES.values():
        assert strokes and all(len(s) >= 2 for s in strokes)


def _trajectory_signature(seq, n=32):
    """Arc-length resampled pen-down polyline, scale/offset normalized."""
    pts = seq.points[seq.points[:, 2] == 1, :2]
    pts = pts - pts.min(axis=0)
    scale = max(pts.max(), 1e-9)
    pts = pts / scale
    t = np.linspace(0, len(pts) - 1, n)
    i0 = np.floor(t).astype(int)
    i1 = np.minimum(i0 + 1, len(pts) - 1)
    frac = (t - i0)[:, None]
    return ((1 - frac) * pts[i0] + frac * pts[i1]).ravel()


def test_one_nearest_neighbor_recovers_glyph_identity():
    # single-glyph draws; leave-one-out 1-NN on point clouds must exceed 95%
    rng = np.random.default_rng(11)
    seqs = synth_generate(DEFAULT_ALPHABET, 200, rng, length_range=(1, 1))
    feats = np.stack([_trajectory_signature(s) for s in seqs])
    labels = np.array([s.text for s in seqs])
    d2 = ((feats[:, None, :] - feats[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    predicted = labels[d2.argmin(axis=1)]
    accuracy = (predicted == labels).mean()
    assert accuracy > 0.95, f"1-NN glyph accuracy {accuracy:.3f}"
