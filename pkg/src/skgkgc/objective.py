"""Scores and losses: cosine triple scores, relation classifier, margin InfoNCE, cross-entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU_BOUNDS = (0.005, 0.5)
MARGIN = 0.02
INIT_TAU = 0.05


def cosine_score(a, b) -> float:
    """Cosine of two unit vectors, i.e. their dot product."""
    return float(np.dot(a, b))


@dataclass
class LossConfig:
    additive_margin: float = MARGIN
    log_inv_temperature: float = math.log(1.0 / INIT_TAU)
    tau_bounds: tuple[float, float] = TAU_BOUNDS

    @property
    def tau(self) -> float:
        return math.exp(-self.log_inv_temperature)

    def clamp(self) -> None:
        lo, hi = self.tau_bounds
        # tau = exp(-theta) in [lo, hi]  <=>  theta in [-log hi, -log lo]
        self.log_inv_temperature = min(max(self.log_inv_temperature, -math.log(hi)), -math.log(lo))


@dataclass
class InfoNCEResult:
    loss: float
    grad_known: np.ndarray
    grad_target: np.ndarray
    grad_log_inv_temperature: float


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def info_nce_loss(known, targets, cfg: LossConfig, mask=None) -> InfoNCEResult:
    """Mean in-batch InfoNCE with an additive margin on the positive pair.

    Row ``i`` of ``known`` is paired with row ``i`` of ``targets``; every other
    target is a negative unless ``mask[i, j]`` is True (known false negative).
    Gradients are taken w.r.t. both embedding matrices and the log inverse
    temperature.
    """
    known = np.asarray(known, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = known.shape[0]
    if n == 0:
        raise ValueError("InfoNCE needs at least one pair")
    if targets.shape != known.shape:
        raise ValueError("known and target batches must have equal shapes")
    scale = math.exp(cfg.log_inv_temperature)
    scores = known @ targets.T
    eye = np.eye(n, dtype=bool)
    margined = scores - cfg.additive_margin * eye
    logits = margined * scale
    excluded = np.zeros((n, n), dtype=bool) if mask is None else np.asarray(mask, dtype=bool) & ~eye
    logits = np.where(excluded, -np.inf, logits)
    logp = _log_softmax(logits)
    loss = -float(np.mean(np.diag(logp)))

    probs = np.where(excluded, 0.0, np.exp(logp))
    d_logits = (probs - eye) / n
    d_scores = d_logits * scale
    grad_known = d_scores @ targets
    grad_target = d_scores.T @ known
    grad_theta = float(np.sum(np.where(excluded, 0.0, d_logits * margined * scale)))
    return InfoNCEResult(loss, grad_known, grad_target, grad_theta)


@dataclass
class RelationClassifierParams:
    weight: np.ndarray  # n_relations x dim_out

    @classmethod
    def init(cls, n_relations: int, dim: int, seed=0, scale: float = 0.05, dtype=np.float32):
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-scale, scale, (n_relations, dim)).astype(dtype))


def relation_logits(p: RelationClassifierParams, e_ht) -> np.ndarray:
    """Logits ``e_ht @ W^T`` for one vector or a batch of rows."""
    e_ht = np.asarray(e_ht)
    if e_ht.shape[-1] != p.weight.shape[1]:
        raise ValueError(f"embedding dim {e_ht.shape[-1]} != classifier dim {p.weight.shape[1]}")
    return e_ht @ p.weight.T


def relation_ce_loss(logits, true_relation):
    """Mean cross-entropy and its gradient w.r.t. the logits.

    Accepts a single logit vector with an int label or a batch with an array
    of labels.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    logits2 = logits[None, :] if single else logits
    labels = np.atleast_1d(np.asarray(true_relation))
    k = logits2.shape[1]
    if labels.shape[0] != logits2.shape[0]:
        raise ValueError("one label per logit row required")
    if np.any(labels < 0) or np.any(labels >= k):
        raise IndexError(f"relation index out of range for {k} classes")
    logp = _log_softmax(logits2)
    rows = np.arange(len(labels))
    loss = -float(np.mean(logp[rows, labels]))
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    grad /= len(labels)
    return loss, (grad[0] if single else grad)


def total_loss(l_hp: float, l_rp: float, l_tp: float, w) -> float:
    """Weighted sum of the three subtask losses."""
    w_hp, w_rp, w_tp = (w.hp, w.rp, w.tp) if hasattr(w, "hp") else w
    return l_hp * w_hp + l_rp * w_rp + l_tp * w_tp
