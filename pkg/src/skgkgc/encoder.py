"""Tokenizer and a compact bag-of-embeddings text encoder with analytic gradients.

Forward pass: mean of token embeddings (PAD masked) -> affine projection ->
tanh -> L2 normalization. Parameters keep whatever float dtype they were
created with; gradient checks run in float64, training in float32.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BOS, SEP, PSEP, UNK, PAD = "[BOS]", "[SEP]", "[PSEP]", "[UNK]", "[PAD]"
SPECIALS = (BOS, SEP, PSEP, UNK, PAD)
BOS_ID, SEP_ID, PSEP_ID, UNK_ID, PAD_ID = range(5)
MAX_TOKENS = 50

_TOKEN = re.compile(r"\[PSEP\]|\[SEP\]|[^\W_]+", re.IGNORECASE)


def split_tokens(text: str) -> list[str]:
    """Lowercased word tokens; ``[SEP]``/``[PSEP]`` markers survive intact."""
    out = []
    for tok in _TOKEN.findall(text):
        up = tok.upper()
        out.append(up if up in (SEP, PSEP) else tok.lower())
    return out


class Vocabulary:
    def __init__(self, tokens):
        self.itos = list(tokens)
        if tuple(self.itos[:5]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, tok):
        return tok in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def index(self, tok: str) -> int:
        return self.stoi.get(tok, UNK_ID)

    def to_tsv(self) -> str:
        return "".join(f"{t}\t{i}\n" for i, t in enumerate(self.itos))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_tsv().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        rows = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line:
                tok, idx = line.rsplit("\t", 1)
                rows.append((int(idx), tok))
        rows.sort()
        if [i for i, _ in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: vocabulary indices are not dense")
        return cls(t for _, t in rows)


def build_vocab(texts, max_size: int = 30000) -> Vocabulary:
    texts = list(texts)
    if not texts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if max_size < len(SPECIALS):
        raise ValueError("max_size must leave room for the special tokens")
    counts = Counter(t for text in texts for t in split_tokens(text) if t not in (SEP, PSEP))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(list(SPECIALS) + [t for t, _ in ranked[: max_size - len(SPECIALS)]])


def tokenize(v: Vocabulary, text: str, max_tokens: int = MAX_TOKENS) -> list[int]:
    ids = [BOS_ID] + [v.index(t) for t in split_tokens(text)]
    return ids[: max(1, max_tokens)]


@dataclass
class EncoderParams:
    token_embeddings: np.ndarray  # vocab_size x dim_in
    projection: np.ndarray  # dim_in x dim_out
    projection_bias: np.ndarray  # dim_out

    @classmethod
    def init(cls, vocab_size: int, dim_in: int = 64, dim_out: int = 64, seed=0, scale: float = 0.05, dtype=np.float32):
        rng = np.random.default_rng(seed)
        emb = rng.uniform(-scale, scale, (vocab_size, dim_in))
        proj = rng.uniform(-scale, scale, (dim_in, dim_out))
        return cls(emb.astype(dtype), proj.astype(dtype), np.zeros(dim_out, dtype=dtype))

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "token_embeddings": self.token_embeddings,
            "projection": self.projection,
            "projection_bias": self.projection_bias,
        }

    def copy(self) -> "EncoderParams":
        return EncoderParams(*(a.copy() for a in self.arrays().values()))

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(*(np.zeros_like(a) for a in self.arrays().values()))

    def validate(self) -> None:
        v, din = self.token_embeddings.shape
        if self.projection.shape[0] != din or self.projection_bias.shape != (self.projection.shape[1],):
            raise ValueError("inconsistent encoder parameter shapes")
        for name, a in self.arrays().items():
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite values in {name}")


@dataclass
class _Cache:
    ids: np.ndarray  # B x L padded
    mask: np.ndarray  # B x L, 1 for real tokens
    counts: np.ndarray  # B
    act: np.ndarray  # tanh output, B x dim_out
    norm: np.ndarray  # B
    out: np.ndarray  # B x dim_out
    pooled: np.ndarray  # B x dim_in


def pad_batch(batch) -> np.ndarray:
    width = max(len(t) for t in batch)
    ids = np.full((len(batch), width), PAD_ID, dtype=np.int64)
    for i, t in enumerate(batch):
        ids[i, : len(t)] = t
    return ids


def forward(p: EncoderParams, batch) -> tuple[np.ndarray, _Cache]:
    """Encode a batch of token sequences; returns unit rows and a backward cache."""
    if not len(batch):
        raise ValueError("empty batch")
    ids = batch if isinstance(batch, np.ndarray) else pad_batch(batch)
    mask = (ids != PAD_ID).astype(p.token_embeddings.dtype)
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("cannot encode an all-PAD sequence")
    pooled = (p.token_embeddings[ids] * mask[..., None]).sum(axis=1) / counts[:, None]
    act = np.tanh(pooled @ p.projection + p.projection_bias)
    norm = np.linalg.norm(act, axis=1)
    norm = np.maximum(norm, np.finfo(act.dtype).tiny)
    out = act / norm[:, None]
    return out, _Cache(ids, mask, counts, act, norm, out, pooled)


def backward(p: EncoderParams, cache: _Cache, upstream: np.ndarray) -> EncoderParams:
    """Parameter gradients of ``sum(upstream * forward(...))``."""
    upstream = np.asarray(upstream)
    if upstream.shape != cache.out.shape:
        raise ValueError(f"upstream gradient shape {upstream.shape} != output shape {cache.out.shape}")
    dt = p.token_embeddings.dtype
    g = upstream.astype(dt, copy=False)
    e = cache.out
    # d(a/|a|) = (I - e e^T) / |a|
    d_act = (g - e * np.sum(e * g, axis=1, keepdims=True)) / cache.norm[:, None]
    d_z = d_act * (1.0 - cache.act**2)
    grads = p.zeros_like()
    grads.projection[...] = cache.pooled.T @ d_z
    grads.projection_bias[...] = d_z.sum(axis=0)
    d_pooled = (d_z @ p.projection.T) / cache.counts[:, None]
    per_tok = d_pooled[:, None, :] * cache.mask[..., None]
    np.add.at(grads.token_embeddings, cache.ids.ravel(), per_tok.reshape(-1, per_tok.shape[-1]))
    return grads


def encode(p: EncoderParams, tokens) -> np.ndarray:
    out, _ = forward(p, [list(tokens)])
    return out[0]


def encode_backward(p: EncoderParams, tokens, upstream_gradient) -> EncoderParams:
    upstream = np.asarray(upstream_gradient)
    if upstream.shape != (p.projection.shape[1],):
        raise ValueError("upstream gradient does not match the encoder output dimension")
    _, cache = forward(p, [list(tokens)])
    return backward(p, cache, upstream[None, :])
