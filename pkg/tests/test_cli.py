"""Command-line surface: exit codes, file outputs, output schemas."""

import json

import numpy as np

from penrec.cli import main
from penrec.data import load_dataset, save_dataset
from penrec.synth import synth_generate


TINY_CONFIG = {
    "encoder": {"d": 16, "conv1d_spec": [[8, 3, 1], [8, 3, 2], [8, 3, 1],
                                         [8, 3, 2], [8, 3, 1], [16, 3, 2]],
                "gru_layers": 1},
    "alignment": {"layers": 1, "heads": 2},
    "training": {"batch_size": 4, "epochs": 1, "max_steps": 3, "lr_max": 1e-3,
                 "lr_min": 1e-5, "augment": False, "val_fraction": 0.0, "seed": 0},
}


def write_config(tmp_path, **extra):
    doc = json.loads(json.dumps(TINY_CONFIG))
    doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def make_data(tmp_path, n=8, name="train.jsonl", seed=0):
    seqs = synth_generate("abcd", n, np.random.default_rng(seed), length_range=(1, 2))
    path = tmp_path / name
    save_dataset(path, seqs)
    return path


def test_synth_writes_valid_jsonl(tmp_path):
    out = tmp_path / "synth.jsonl"
    assert main(["synth", "--n", "5", "--vocab", "abc", "--seed", "1", "--out", str(out)]) == 0
    seqs = load_dataset(out)
    assert len(seqs) == 5


def test_synth_n_zero_gives_empty_file(tmp_path):
    out = tmp_path / "empty.jsonl"
    assert main(["synth", "--n", "0", "--out", str(out)]) == 0
    assert out.read_text() == ""


def test_synth_unknown_glyph_is_config_error(tmp_path):
    out = tmp_path / "x.jsonl"
    assert main(["synth", "--n", "1", "--vocab", "a!", "--out", str(out)]) == 2


def test_render_outputs_height_32(tmp_path):
    data = make_data(tmp_path, n=3)
    out_dir = tmp_path / "previews"
    assert main(["render", "--input", str(data), "--out", str(out_dir)]) == 0
    pgms = sorted(out_dir.glob("*.pgm"))
    assert len(pgms) == 3
    for p in pgms:
        header = p.read_bytes().split(b"\n", 3)
        assert header[0] == b"P5"
        width, height = header[1].split()
        assert int(height) == 32 and int(width) % 8 == 0


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = main(["train", "--config", str(tmp_path / "nope.json"),
                 "--data", "x", "--out", str(tmp_path)])
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    path = write_config(tmp_path, surprise=1)
    data = make_data(tmp_path)
    code = main(["train", "--config", str(path), "--data", str(data),
                 "--out", str(tmp_path / "run")])
    assert code == 2
    assert "surprise" in capsys.readouterr().err


def test_train_eval_infer_round_trip(tmp_path, capsys):
    config = write_config(tmp_path)
    data = make_data(tmp_path)
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--data", str(data),
                 "--out", str(run), "--quiet"]) == 0
    capsys.readouterr()
    ckpt = run / "model.ckpt"
    assert ckpt.exists() and (run / "train_log.jsonl").exists()

    assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data)]) == 0
    rep = json.loads(capsys.readouterr().out.strip())
    assert set(rep) == {"cer", "wer", "ar", "cr", "n_sequences", "n_chars"}
    assert rep["n_sequences"] == 8

    assert main(["infer", "--checkpoint", str(ckpt), "--input", str(data)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 8


def test_eval_empty_dataset_exits_2(tmp_path, capsys):
    config = write_config(tmp_path)
    data = make_data(tmp_path)
    run = tmp_path / "run"
    main(["train", "--config", str(config), "--data", str(data), "--out", str(run), "--quiet"])
    capsys.readouterr()
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["eval", "--checkpoint", str(run / "model.ckpt"), "--data", str(empty)]) == 2


def test_seeded_trainings_match(tmp_path, capsys):
    config = write_config(tmp_path)
    data = make_data(tmp_path)
    outs = []
    for name in ("r1", "r2"):
        assert main(["train", "--config", str(config), "--data", str(data),
                     "--out", str(tmp_path / name), "--seed", "11", "--quiet"]) == 0
        outs.append((tmp_path / name / "model.ckpt").read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_infer_accepts_lines_without_text(tmp_path, capsys):
    config = write_config(tmp_path)
    data = make_data(tmp_path)
    run = tmp_path / "run"
    main(["train", "--config", str(config), "--data", str(data), "--out", str(run), "--quiet"])
    capsys.readouterr()
    bare = tmp_path / "bare.jsonl"
    record = {"id": "q", "points": [[0, 0, 1], [10, 10, 1], [20, 5, 1], [30, 12, 1],
                                    [40, 3, 1], [50, 20, 1], [60, 8, 1], [70, 15, 1]]}
    bare.write_text(json.dumps(record) + "\n")
    assert main(["infer", "--checkpoint", str(run / "model.ckpt"), "--input", str(bare)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1
