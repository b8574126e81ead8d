"""Dataset ingestion, normalization, rendering, augmentation, vocabulary."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penrec import data as D
from penrec.synth import DEFAULT_ALPHABET, synth_generate


def seq_of(points, text="x", sid="s"):
    return D.TrajectorySequence(id=sid, points=np.asarray(points, dtype=np.float64), text=text)


# ---------------------------------------------------------------------------
# loading


def test_load_simple_line(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"id":"a","points":[[0,0,1],[1,1,1]],"text":"x"}\n')
    seqs = D.load_dataset(p)
    assert len(seqs) == 1 and seqs[0].length == 2 and seqs[0].text == "x"


def test_load_rejects_bad_pen_state_with_line_number(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"id":"a","points":[[0,0,1],[1,1,1]],"text":"x"}\n'
                 '{"id":"b","points":[[0,0,1],[1,1,2]],"text":"y"}\n')
    with pytest.raises(D.DataError, match="line 2"):
        D.load_dataset(p)


def test_load_rejects_empty_file(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text("")
    with pytest.raises(D.DataError, match="empty"):
        D.load_dataset(p)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    seqs = synth_generate(DEFAULT_ALPHABET, 5, rng)
    p = tmp_path / "d.jsonl"
    D.save_dataset(p, seqs)
    loaded = D.load_dataset(p)
    assert [s.id for s in loaded] == [s.id for s in seqs]
    for a, b in zip(seqs, loaded):
        np.testing.assert_array_equal(a.points, b.points)
        assert a.text == b.text


# ---------------------------------------------------------------------------
# normalization


def test_normalize_scale_factor():
    s = D.normalize(seq_of([[0, 10, 1], [5, 20, 1]]))
    px, py = s.points[:, 0], s.points[:, 1]
    assert py.min() == 0.0 and py.max() == pytest.approx(32.0)
    assert px.max() == pytest.approx(5 * 3.2)


def test_normalize_idempotent():
    s = D.normalize(seq_of([[3, 1, 1], [9, 7, 0], [4, 5, 1]]))
    again = D.normalize(s)
    np.testing.assert_allclose(again.points, s.points, atol=1e-12)


def test_normalize_preserves_aspect_ratio():
    raw = seq_of([[0, 0, 1], [40, 10, 1], [13, 4, 1]])
    s = D.normalize(raw)
    raw_aspect = 40.0 / 10.0
    got_aspect = s.points[:, 0].max() / s.points[:, 1].max()
    assert got_aspect == pytest.approx(raw_aspect)


def test_normalize_zero_height_fallback():
    s = D.normalize(seq_of([[0, 5, 1], [100, 5, 1]]))
    assert np.all(s.points[:, 1] == 16.0)
    assert s.points[:, 0].max() <= 512.0 + 1e-9


# ---------------------------------------------------------------------------
# rendering


def test_render_horizontal_stroke():
    s = seq_of([[0, 0, 1], [7, 0, 1]])
    s = D.TrajectorySequence(id="h", points=s.points, text="")
    img = D.render(s)
    assert img.shape == (32, 8)
    np.testing.assert_array_equal(img[0], np.ones(8, dtype=np.float32))
    assert img[1:].sum() == 0


def test_render_all_pen_up_is_blank():
    img = D.render(seq_of([[0, 0, 0], [10, 20, 0], [5, 30, 0]]))
    assert img.sum() == 0.0


def test_render_width_is_multiple_of_8():
    for max_px in (0.0, 3.0, 7.9, 8.0, 100.3):
        w = D.render_width(max_px)
        assert w % 8 == 0 and w >= 8 and w >= max_px


def test_every_pen_down_point_is_inked():
    rng = np.random.default_rng(7)
    for seq in synth_generate(DEFAULT_ALPHABET, 10, rng):
        norm = D.normalize(seq)
        img = D.render(norm)
        w = img.shape[1]
        for px, py, s in norm.points:
            if s == 1:
                r = min(int(np.rint(py)), 31)
                c = min(int(np.rint(px)), w - 1)
                assert img[r, c] == 1.0


def test_isolated_pen_down_point_leaves_a_dot():
    img = D.render(seq_of([[0, 0, 0], [4, 16, 1], [8, 32, 0]]))
    assert img[16, 4] == 1.0
    assert img.sum() == 1.0


# ---------------------------------------------------------------------------
# augmentation


def _anchored_sequence(n_down=50):
    # pen-up anchors pin the bounding box so re-normalization is the identity
    pts = [[0.0, 0.0, 0.0], [100.0, 32.0, 0.0]]
    rng = np.random.default_rng(5)
    for _ in range(n_down):
        pts.append([rng.uniform(3, 97), rng.uniform(3, 29), 1.0])
    return D.normalize(seq_of(pts))


def test_augment_fraction_zero_is_identity():
    s = _anchored_sequence()
    out = D.augment(s, 0.0, 1.0, np.random.default_rng(0))
    np.testing.assert_allclose(out.points, s.points, atol=1e-12)


def test_augment_moves_exactly_floor_fraction_T_points():
    s = _anchored_sequence(n_down=98)  # T = 100
    out = D.augment(s, 0.2, 1.0, np.random.default_rng(1))
    moved = np.any(out.points[:, :2] != s.points[:, :2], axis=1)
    assert moved.sum() == 20
    np.testing.assert_array_equal(out.points[:, 2], s.points[:, 2])


def test_augment_only_touches_pen_down_points():
    s = _anchored_sequence(n_down=30)
    out = D.augment(s, 0.5, 1.0, np.random.default_rng(2))
    up = s.points[:, 2] == 0
    np.testing.assert_array_equal(out.points[up], s.points[up])


def test_augment_is_seed_deterministic():
    s = _anchored_sequence()
    a = D.augment(s, 0.2, 1.0, np.random.default_rng(3))
    b = D.augment(s, 0.2, 1.0, np.random.default_rng(3))
    np.testing.assert_array_equal(a.points, b.points)


# ---------------------------------------------------------------------------
# vocabulary


def test_vocab_orders_characters_after_reserved():
    ds = [seq_of([[0, 0, 1], [1, 1, 1]], text=t) for t in ("ab", "ba")]
    v = D.build_vocab(ds)
    assert v.size == 5
    assert v.encode("ab") == [3, 4]
    assert v.encode("ba") == [4, 3]


def test_vocab_encode_decode_round_trip():
    ds = [seq_of([[0, 0, 1], [1, 1, 1]], text="hello world")]
    v = D.build_vocab(ds)
    assert v.decode(v.encode("hello world")) == "hello world"


def test_vocab_rejects_reserved_characters():
    ds = [seq_of([[0, 0, 1], [1, 1, 1]], text="a\x01b")]
    with pytest.raises(D.DataError, match="reserved"):
        D.build_vocab(ds)


def test_vocab_deterministic_ordering():
    ds = [seq_of([[0, 0, 1], [1, 1, 1]], text="zyx")]
    assert D.build_vocab(ds).to_list() == D.build_vocab(list(reversed(ds))).to_list()


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), min_size=1, max_size=30))
@settings(max_examples=50, deadline=None)
def test_vocab_round_trip_property(text):
    ds = [seq_of([[0, 0, 1], [1, 1, 1]], text=text)]
    v = D.build_vocab(ds)
    assert v.decode(v.encode(text)) == text


# ---------------------------------------------------------------------------
# PGM


def test_write_pgm(tmp_path):
    img = np.zeros((32, 8), dtype=np.float32)
    img[0, 0] = 1.0
    path = tmp_path / "x.pgm"
    D.write_pgm(img, path)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n8 32\n255\n")
    body = blob.split(b"255\n", 1)[1]
    assert len(body) == 32 * 8
    assert body[0] == 255 and body[1] == 0
