"""Checkpoint directories: a JSON manifest plus one little-endian float32 blob.

Layout::

    <dir>/manifest.json   versioned; every tensor with shape, byte offset, length
    <dir>/tensors.bin     concatenated '<f4' tensors
    <dir>/vocab.tsv       token<TAB>index
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .balancer import TaskWeights, init_weights
from .encoder import EncoderParams, Vocabulary
from .model import SKGModel
from .objective import LossConfig, RelationClassifierParams

FORMAT = "skgkgc-checkpoint"
VERSION = 1
DTYPE = "<f4"


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class TruncatedTensorError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class VocabularyMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    model: SKGModel
    epoch: int = 0
    weights: TaskWeights = field(default_factory=init_weights)
    rng_state: dict | None = None
    config: dict = field(default_factory=dict)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {f"main.{k}": v for k, v in self.model.main.arrays().items()}
        out.update({f"secondary.{k}": v for k, v in self.model.secondary.arrays().items()})
        out["classifier.weight"] = self.model.classifier.weight
        return out

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        a, b = self.tensors(), other.tensors()
        return (
            a.keys() == b.keys()
            and all(a[k].dtype == b[k].dtype and a[k].shape == b[k].shape and a[k].tobytes() == b[k].tobytes() for k in a)
            and self.model.vocab == other.model.vocab
            and self.model.relation_ids == other.model.relation_ids
            and self.model.loss_cfg == other.model.loss_cfg
            and self.model.max_tokens == other.model.max_tokens
            and self.epoch == other.epoch
            and self.weights == other.weights
            and self.rng_state == other.rng_state
            and self.config == other.config
        )


def save_checkpoint(c: Checkpoint, path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    entries, offset = [], 0
    with open(d / "tensors.bin", "wb") as fh:
        for name, arr in c.tensors().items():
            if arr.dtype != np.float32:
                raise CheckpointError(f"{name}: only float32 tensors can be checkpointed exactly, got {arr.dtype}")
            raw = np.ascontiguousarray(arr, dtype=DTYPE).tobytes()
            fh.write(raw)
            entries.append({"name": name, "shape": list(arr.shape), "dtype": DTYPE, "offset": offset, "nbytes": len(raw)})
            offset += len(raw)
    c.model.vocab.save(d / "vocab.tsv")
    lc = c.model.loss_cfg
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "epoch": c.epoch,
        "tensors": entries,
        "relation_ids": c.model.relation_ids,
        "vocab_hash": c.model.vocab.hash,
        "max_tokens": c.model.max_tokens,
        "loss": {
            "additive_margin": lc.additive_margin,
            "log_inv_temperature": lc.log_inv_temperature,
            "tau_bounds": list(lc.tau_bounds),
        },
        "weights": json.loads(c.weights.to_json()),
        "rng_state": c.rng_state,
        "config": c.config,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


def _tuple_fields(d: dict) -> dict:
    return {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}


def load_checkpoint(path, vocab: Vocabulary | None = None) -> Checkpoint:
    """Load a checkpoint directory.

    If ``vocab`` is given it must hash-match the vocabulary the checkpoint
    was trained with.
    """
    d = Path(path)
    try:
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CheckpointError(f"no manifest in {d}") from exc
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint {manifest.get('format')!r} version {manifest.get('version')!r}; expected {VERSION}"
        )
    stored_vocab = Vocabulary.load(d / "vocab.tsv")
    if stored_vocab.hash != manifest["vocab_hash"]:
        raise VocabularyMismatchError("vocab.tsv does not match the manifest's vocabulary hash")
    if vocab is not None and vocab.hash != manifest["vocab_hash"]:
        raise VocabularyMismatchError("vocabulary hash differs from the one the checkpoint was trained with")
    blob = (d / "tensors.bin").read_bytes()
    tensors = {}
    for e in manifest["tensors"]:
        shape = tuple(e["shape"])
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if e["nbytes"] != expected:
            raise ShapeMismatchError(f"{e['name']}: {e['nbytes']} bytes recorded for shape {shape}")
        end = e["offset"] + e["nbytes"]
        if end > len(blob):
            raise TruncatedTensorError(f"truncated tensor {e['name']}: needs bytes up to {end}, blob has {len(blob)}")
        tensors[e["name"]] = np.frombuffer(blob, dtype=DTYPE, count=expected // 4, offset=e["offset"]).reshape(shape).astype(np.float32)
    main = EncoderParams(tensors["main.token_embeddings"], tensors["main.projection"], tensors["main.projection_bias"])
    sec = EncoderParams(
        tensors["secondary.token_embeddings"], tensors["secondary.projection"], tensors["secondary.projection_bias"]
    )
    for p in (main, sec):
        try:
            p.validate()
        except ValueError as exc:
            err = ShapeMismatchError if "shape" in str(exc) else CheckpointError
            raise err(f"invalid encoder tensors: {exc}") from exc
    if main.token_embeddings.shape[0] != len(stored_vocab):
        raise ShapeMismatchError("embedding rows do not match the vocabulary size")
    clf = RelationClassifierParams(tensors["classifier.weight"])
    if clf.weight.shape != (len(manifest["relation_ids"]), main.projection.shape[1]):
        raise ShapeMismatchError("classifier shape does not match relations x dim")
    loss = manifest["loss"]
    model = SKGModel(
        vocab=stored_vocab,
        relation_ids=list(manifest["relation_ids"]),
        main=main,
        secondary=sec,
        classifier=clf,
        loss_cfg=LossConfig(loss["additive_margin"], loss["log_inv_temperature"], tuple(loss["tau_bounds"])),
        max_tokens=manifest["max_tokens"],
    )
    return Checkpoint(
        model=model,
        epoch=manifest["epoch"],
        weights=TaskWeights(**_tuple_fields(manifest["weights"])),
        rng_state=manifest["rng_state"],
        config=manifest["config"],
    )
