"""Collaborative two-stream training, checkpointing, and evaluation.

Batches are processed sample by sample (sequences keep their exact lengths,
so no padding or masking is needed) and the per-sample losses are averaged
before the weighted combination. Runs are deterministic under the config
seed: parameter init, shuffling, and augmentation all derive from it.
"""

from __future__ import annotations

import functools
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import metrics
from .autodiff import AdamState
from .config import (AlignConfig, ConfigError, EncoderConfig, TrainConfig,
                     align_config_from_dict, encoder_config_from_dict, to_dict)
from .data import Vocabulary, augment, normalize
from .model import IMAGE_PREFIXES, Recognizer


class DivergenceError(RuntimeError):
    """Training loss went non-finite; the last good checkpoint is retained."""


class CheckpointError(ValueError):
    """Checkpoint file inconsistent with its manifest or config."""


CHECKPOINT_VERSION = 1


def batch_losses(model: Recognizer, batch, align_weight: float):
    """Average per-sample components and combine into the total loss.

    Returns (total, components) where components maps "traj"/"img"/"align"
    to scalar DiffArrays; "align" is present only when the loss is active.
    The total is exactly traj + img (+ weight * align when active).
    """
    per = [model.sample_losses(seq) for seq in batch]
    inv = 1.0 / len(per)

    def avg(key):
        vals = [p[key] for p in per]
        if any(v is None for v in vals):
            return None
        return ad.mul(functools.reduce(ad.add, vals), inv)

    comps = {"traj": avg("traj"), "img": avg("img")}
    align = avg("align")
    total = ad.add(comps["traj"], comps["img"])
    if align is not None:
        comps["align"] = align
        if align_weight != 0.0:
            total = ad.add(total, ad.mul(align, align_weight))
    return total, comps


@dataclass
class TrainResult:
    model: Recognizer
    records: list[dict] = field(default_factory=list)
    checkpoint_path: Path | None = None
    log_path: Path | None = None


def split_train_val(dataset, val_fraction: float, rng: np.random.Generator):
    order = rng.permutation(len(dataset))
    n_val = int(round(val_fraction * len(dataset)))
    n_val = min(n_val, len(dataset) - 1)
    val_idx = set(order[:n_val].tolist())
    train = [dataset[i] for i in range(len(dataset)) if i not in val_idx]
    val = [dataset[i] for i in sorted(val_idx)]
    return train, val


def train(dataset, enc_cfg: EncoderConfig, align_cfg: AlignConfig, cfg: TrainConfig,
          vocab: Vocabulary, out_dir=None, quiet: bool = True) -> TrainResult:
    """Run the collaborative loop; returns the model plus the JSONL records."""
    cfg.validate()
    if not dataset:
        raise ValueError("train: empty dataset")
    model = Recognizer(enc_cfg, align_cfg, vocab, seed=cfg.seed)
    ss = np.random.SeedSequence(cfg.seed)
    shuffle_rng, aug_rng = [np.random.default_rng(c) for c in ss.spawn(2)]

    base = [normalize(seq) for seq in dataset]
    train_set, val_set = split_train_val(base, cfg.val_fraction, shuffle_rng)

    steps_per_epoch = max(1, -(-len(train_set) // cfg.batch_size))
    if cfg.max_steps is not None:
        total_steps = cfg.max_steps
        epochs = -(-cfg.max_steps // steps_per_epoch)
    else:
        total_steps = cfg.epochs * steps_per_epoch
        epochs = cfg.epochs

    adam = AdamState(model.params)
    records: list[dict] = []
    result = TrainResult(model=model)
    log_fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.checkpoint_path = out_dir / "model.ckpt"
        result.log_path = out_dir / "train_log.jsonl"
        log_fh = open(result.log_path, "w", encoding="utf-8")

    def emit(rec: dict):
        records.append(rec)
        if log_fh is not None:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            log_fh.flush()
        if not quiet:
            print(json.dumps(rec, sort_keys=True))

    step = 0
    last_good: dict[str, np.ndarray] | None = None
    try:
        for epoch in range(epochs):
            order = shuffle_rng.permutation(len(train_set))
            for lo in range(0, len(order), cfg.batch_size):
                if step >= total_steps:
                    break
                batch = []
                for i in order[lo:lo + cfg.batch_size]:
                    seq = train_set[i]
                    if cfg.augment:
                        seq = augment(seq, cfg.augment_fraction, cfg.augment_magnitude, aug_rng)
                    batch.append(seq)
                total, comps = batch_losses(model, batch, cfg.align_weight)
                if not np.isfinite(total.data):
                    bad = [k for k, v in comps.items() if v is not None and not np.isfinite(v.data)]
                    if last_good is not None:
                        for name, values in last_good.items():
                            model.params[name].data = values
                    if result.checkpoint_path is not None:
                        save_checkpoint(model, result.checkpoint_path)
                    raise DivergenceError(
                        f"non-finite loss at step {step} (components: {bad or ['total']})")
                # these params produced a finite loss; keep them as last-good
                last_good = {name: p.data.copy() for name, p in model.params.items()}
                ad.zero_grads(model.params.values())
                ad.backward(total)
                ad.clip_grads(model.params, cfg.grad_clip)
                lr = ad.cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min)
                ad.adam_step(model.params, adam, lr)
                step += 1
                align_val = comps.get("align")
                emit({
                    "step": step,
                    "lr": lr,
                    "L_1d": float(comps["traj"].data),
                    "L_2d": float(comps["img"].data),
                    "L_align": float(align_val.data) if align_val is not None else 0.0,
                    "L_all": float(total.data),
                })
            if val_set:
                refs = [s.text for s in val_set]
                hyps = [model.infer_text(s, max_len=cfg.max_decode_len) for s in val_set]
                emit({"epoch": epoch + 1, "step": step, "val_cer": metrics.cer(refs, hyps)})
            if result.checkpoint_path is not None:
                save_checkpoint(model, result.checkpoint_path)
            if step >= total_steps:
                break
        if result.checkpoint_path is not None:
            save_checkpoint(model, result.checkpoint_path)
    finally:
        if log_fh is not None:
            log_fh.close()
    result.records = records
    return result


def evaluate(model: Recognizer, dataset, max_decode_len: int = 256) -> dict:
    """Single-stream inference over a dataset, reported as the metrics JSON."""
    if not dataset:
        raise ValueError("evaluate: empty dataset")
    refs = [seq.text for seq in dataset]
    hyps = [model.infer_text(normalize(seq), max_len=max_decode_len) for seq in dataset]
    return metrics.report(refs, hyps)


# ---------------------------------------------------------------------------
# checkpoint format: one JSON header line (config, vocab, manifest), an
# 8-byte little-endian payload length, then raw little-endian float32 data.


def save_checkpoint(model: Recognizer, path) -> None:
    manifest = []
    chunks = []
    offset = 0
    for name, p in model.params.items():
        arr = np.ascontiguousarray(p.data, dtype="<f4")
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    header = {
        "version": CHECKPOINT_VERSION,
        "encoder": to_dict(model.enc_cfg),
        "alignment": to_dict(model.align_cfg),
        "seed": model.seed,
        "vocab": model.vocab.to_list(),
        "manifest": manifest,
    }
    payload = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)


def load_checkpoint(path) -> Recognizer:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: bad header") from e
        known = {"version", "encoder", "alignment", "seed", "vocab", "manifest"}
        unknown = set(header) - known
        if unknown:
            raise CheckpointError(f"{path}: unknown header keys {sorted(unknown)}")
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
        lenbytes = fh.read(8)
        if len(lenbytes) != 8:
            raise CheckpointError(f"{path}: truncated length prefix")
        (payload_len,) = struct.unpack("<Q", lenbytes)
        payload = fh.read(payload_len)
        if len(payload) != payload_len:
            raise CheckpointError(f"{path}: truncated payload")
    try:
        enc_cfg = encoder_config_from_dict(header["encoder"])
        align_cfg = align_config_from_dict(header["alignment"])
    except ConfigError as e:
        raise CheckpointError(f"{path}: {e}") from e
    vocab = Vocabulary.from_symbols(header["vocab"])
    model = Recognizer(enc_cfg, align_cfg, vocab, seed=int(header["seed"]))

    manifest = header["manifest"]
    names = [m["name"] for m in manifest]
    if names != list(model.params.keys()):
        raise CheckpointError(f"{path}: manifest does not match the model parameter set")
    values = np.frombuffer(payload, dtype="<f4")
    expected = 0
    for m in manifest:
        if m["offset"] != expected:
            raise CheckpointError(f"{path}: bad offset for {m['name']}")
        expected += int(np.prod(m["shape"])) if m["shape"] else 1
    if expected != values.size:
        raise CheckpointError(f"{path}: payload length {values.size} does not match manifest {expected}")
    for m in manifest:
        p = model.params[m["name"]]
        if list(p.data.shape) != m["shape"]:
            raise CheckpointError(f"{path}: shape mismatch for {m['name']}")
        n = p.data.size
        p.data = values[m["offset"]:m["offset"] + n].reshape(p.data.shape).astype(np.float32)
    return model


def zero_image_stream(model: Recognizer) -> None:
    """Blank every image-stream parameter (inference-isolation probe)."""
    for name, p in model.params.items():
        if name.startswith(IMAGE_PREFIXES):
            p.data = np.zeros_like(p.data)
