"""Bi-encoder model container: main/secondary encoders, relation classifier, temperature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import encoder as enc
from .encoder import EncoderParams, Vocabulary
from .expansion import SEP
from .kg import KnowledgeGraph
from .objective import INIT_TAU, LossConfig, RelationClassifierParams


@dataclass
class SKGModel:
    """Two independent encoders plus the relation classification head.

    The main encoder embeds the known side of a query (entity + relation text,
    or ``head [SEP] tail`` for relation prediction); the secondary encoder
    embeds candidate entities. Invocation counters record how many sequences
    each encoder has embedded.
    """

    vocab: Vocabulary
    relation_ids: list[str]
    main: EncoderParams
    secondary: EncoderParams
    classifier: RelationClassifierParams
    loss_cfg: LossConfig = field(default_factory=LossConfig)
    max_tokens: int = enc.MAX_TOKENS
    calls: dict = field(default_factory=lambda: {"main": 0, "secondary": 0})

    @classmethod
    def init(
        cls,
        vocab: Vocabulary,
        relation_ids,
        dim: int = 64,
        seed: int = 0,
        margin: float = 0.02,
        tau: float = INIT_TAU,
        max_tokens: int = enc.MAX_TOKENS,
        dtype=np.float32,
    ) -> "SKGModel":
        # both encoders start from the same weights but are separate arrays
        main = EncoderParams.init(len(vocab), dim, dim, seed=seed, dtype=dtype)
        return cls(
            vocab=vocab,
            relation_ids=list(relation_ids),
            main=main,
            secondary=main.copy(),
            classifier=RelationClassifierParams.init(len(relation_ids), dim, seed=seed + 1, dtype=dtype),
            loss_cfg=LossConfig(margin, math.log(1.0 / tau)),
            max_tokens=max_tokens,
        )

    @property
    def dim(self) -> int:
        return self.main.projection.shape[1]

    def params(self, which: str) -> EncoderParams:
        if which not in ("main", "secondary"):
            raise KeyError(which)
        return getattr(self, which)

    def tokenize(self, texts) -> list[list[int]]:
        return [enc.tokenize(self.vocab, t, self.max_tokens) for t in texts]

    def forward(self, which: str, texts):
        """Embed ``texts`` with one encoder, returning rows and the backward cache."""
        texts = list(texts)
        out, cache = enc.forward(self.params(which), self.tokenize(texts))
        self.calls[which] += len(texts)
        return out, cache

    def embed(self, which: str, texts, batch_size: int = 256) -> np.ndarray:
        texts = list(texts)
        chunks = [self.forward(which, texts[i : i + batch_size])[0] for i in range(0, len(texts), batch_size)]
        return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, self.dim), dtype=self.main.projection.dtype)

    def reset_counters(self) -> None:
        self.calls = {"main": 0, "secondary": 0}


def pair_text(g: KnowledgeGraph, head: str, tail: str) -> str:
    """Relation-prediction input: ``head text [SEP] tail text``."""
    return f"{g.entity_text(head)} {SEP} {g.entity_text(tail)}"
