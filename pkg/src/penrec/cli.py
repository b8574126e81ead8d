"""Command-line entry point: train / eval / infer / render / synth.

Exit codes: 0 success, 1 I/O failure, 2 bad config or data, 3 divergence.
All commands are deterministic under --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_run_config
from .data import (DataError, build_vocab, load_dataset, normalize, render,
                   save_dataset, write_pgm)
from .synth import DEFAULT_ALPHABET, synth_generate
from .training import (CheckpointError, DivergenceError, evaluate,
                       load_checkpoint, train)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_train(args) -> int:
    try:
        cfg = load_run_config(args.config) if args.config else RunConfig()
        if args.data:
            cfg.train_data = args.data
        if args.out:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.training.seed = args.seed
        cfg.validate()
        if not cfg.train_data:
            raise ConfigError("no training data path (set train_data or pass --data)")
        if not cfg.out_dir:
            raise ConfigError("no output directory (set out_dir or pass --out)")
        dataset = load_dataset(cfg.train_data)
        vocab = build_vocab(dataset)
    except (ConfigError, DataError) as e:
        return _fail(EXIT_CONFIG, str(e))
    except OSError as e:
        return _fail(EXIT_IO, str(e))
    try:
        result = train(dataset, cfg.encoder, cfg.alignment, cfg.training, vocab,
                       out_dir=cfg.out_dir, quiet=args.quiet)
    except DivergenceError as e:
        return _fail(EXIT_DIVERGED, str(e))
    except OSError as e:
        return _fail(EXIT_IO, str(e))
    print(json.dumps({
        "checkpoint": str(result.checkpoint_path),
        "log": str(result.log_path),
        "steps": len([r for r in result.records if "L_all" in r]),
    }, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
        dataset = load_dataset(args.data)
        rep = evaluate(model, dataset, max_decode_len=args.max_len)
    except (CheckpointError, ConfigError, DataError, ValueError) as e:
        return _fail(EXIT_CONFIG, str(e))
    except OSError as e:
        return _fail(EXIT_IO, str(e))
    print(json.dumps(rep, sort_keys=True))
    return EXIT_OK


def cmd_infer(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
        dataset = load_dataset(args.input, require_text=False)
    except (CheckpointError, ConfigError, DataError) as e:
        return _fail(EXIT_CONFIG, str(e))
    except OSError as e:
        return _fail(EXIT_IO, str(e))
    for seq in dataset:
        print(model.infer_text(normalize(seq), max_len=args.max_len))
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        dataset = load_dataset(args.input, require_text=False)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for seq in dataset:
            write_pgm(render(normalize(seq)), out_dir / f"{seq.id}.pgm")
    except DataError as e:
        return _fail(EXIT_CONFIG, str(e))
    except OSError as e:
        return _fail(EXIT_IO, str(e))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        rng = np.random.default_rng(args.seed)
        seqs = synth_generate(args.vocab, args.n, rng,
                              length_range=(args.min_len, args.max_len))
        save_dataset(args.out, seqs)
    except (KeyError, ValueError) as e:
        return _fail(EXIT_CONFIG, str(e))
    except OSError as e:
        return _fail(EXIT_IO, str(e))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="penrec",
                                     description="Two-stream pen-trajectory recognizer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSONL dataset")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--data", help="training JSONL (overrides config train_data)")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--seed", type=int, help="overrides config training.seed")
    p.add_argument("--quiet", action="store_true", default=False,
                   help="suppress per-step log lines on stdout")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint; prints metrics JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-len", type=int, default=256)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="print one transcript per input line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--max-len", type=int, default=256)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("render", help="write PGM previews of rendered inputs")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", help="generate a synthetic JSONL dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--vocab", default=DEFAULT_ALPHABET, help="glyph alphabet")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=4)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
