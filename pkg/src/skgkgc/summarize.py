"""TextRank extractive summarization over word-overlap sentence graphs."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

DAMPING = 0.85
TOP_N = 3
TOL = 1e-6
MAX_ITER = 100

_SPLIT = re.compile(r"[.;!?](?:\s+|$)")
_WORD = re.compile(r"\w+")


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SPLIT.split(text) if s.strip()]


def words(sentence: str) -> list[str]:
    return _WORD.findall(sentence.lower())


def sentence_similarity(a: list[str], b: list[str]) -> float:
    """Word-overlap similarity normalized by log sentence lengths.

    Sentences shorter than two tokens would make ``log(1) = 0`` blow up the
    denominator, so they fall back to overlap over the mean length.
    """
    shared = len(set(a) & set(b))
    if shared == 0:
        return 0.0
    if len(a) >= 2 and len(b) >= 2:
        return shared / (math.log(len(a)) + math.log(len(b)))
    return shared / max(1.0, (len(a) + len(b)) / 2)


@dataclass
class SentenceGraph:
    sentences: list[list[str]]
    weights: np.ndarray
    damping: float = DAMPING
    scores: np.ndarray | None = None

    @classmethod
    def from_sentences(cls, sentences: list[str], damping: float = DAMPING) -> "SentenceGraph":
        toks = [words(s) for s in sentences]
        m = len(toks)
        w = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                w[i, j] = w[j, i] = sentence_similarity(toks[i], toks[j])
        return cls(toks, w, damping)


def textrank_scores(g: SentenceGraph, tol: float = TOL, max_iter: int = MAX_ITER) -> np.ndarray:
    """Synchronous TextRank iteration starting from ``1/m``.

    Uses the unnormalized update ``T_i = (1 - d) + d * sum_j w_ji / W_j * T_j``
    where ``W_j`` is node j's total edge weight; isolated nodes contribute
    nothing and settle at ``1 - d``.
    """
    w = np.asarray(g.weights, dtype=np.float64)
    m = w.shape[0]
    if m == 0:
        raise ValueError("textrank needs at least one sentence")
    d = g.damping
    out = w.sum(axis=1)
    # column j of trans holds w_ji / W_j
    trans = np.divide(w, out[:, None], out=np.zeros_like(w), where=out[:, None] > 0).T
    scores = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        new = (1.0 - d) + d * (trans @ scores)
        delta = np.max(np.abs(new - scores))
        scores = new
        if delta < tol:
            break
    g.scores = scores
    return scores


def top_sentences(scores, top_n: int) -> list[int]:
    """Indices of the ``top_n`` best scores (earlier position wins ties), in document order."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(order[:top_n])


def summarize(
    text: str,
    top_n: int = TOP_N,
    damping: float = DAMPING,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> str:
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    sents = split_sentences(text)
    if len(sents) <= top_n:
        return ". ".join(sents)
    scores = textrank_scores(SentenceGraph.from_sentences(sents, damping), tol, max_iter)
    return ". ".join(sents[i] for i in top_sentences(scores, top_n))
