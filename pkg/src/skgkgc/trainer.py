"""Mini-batch multi-task training of the bi-encoder.

Every step draws one mini-batch from a single subtask pool (head prediction,
relation prediction or tail prediction), scales that subtask's loss by its
current weight and applies one optimizer step. Validation at each epoch end
feeds the loss-weight balancer.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import encoder as enc
from .balancer import TaskWeights, init_weights, task_accuracy_signal, update_weights
from .checkpoint import Checkpoint
from .encoder import build_vocab
from .evaluator import evaluate, relation_accuracy
from .expansion import HEAD, TAIL, ExpandedExample, known_answers, original_examples, set_examples
from .kg import DataError, KnowledgeGraph, focusing_ratios
from .model import SKGModel, pair_text
from .objective import info_nce_loss, relation_ce_loss, relation_logits
from .optim import OptimizerState, optimizer_step

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    margin: float = 0.02
    init_tau: float = 0.05
    top_n: int = 3
    max_tokens: int = enc.MAX_TOKENS
    balancing: bool = True
    expansion: bool = True
    min_group_size: int = 2
    max_group: int = 10
    dim: int = 64
    vocab_size: int = 30000
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    adaptive: bool = True
    allow_small_batch: bool = False

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2 and not self.allow_small_batch:
            raise ValueError("batch_size must be >= 2 so every anchor has an in-batch negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    best: Checkpoint
    log: list = field(default_factory=list)


def _example_target_text(g: KnowledgeGraph, ex: ExpandedExample) -> str:
    return g.entity_text(ex.target)


def train_vocab(g: KnowledgeGraph, max_size: int):
    ents = sorted({e for h, _, t in g.train for e in (h, t)})
    texts = [g.entity_text(e) for e in ents] + [g.relations[r] for r in g.relation_ids]
    return build_vocab(texts, max_size)


def model_params(model: SKGModel, theta: np.ndarray) -> dict:
    p = {f"main.{k}": v for k, v in model.main.arrays().items()}
    p.update({f"secondary.{k}": v for k, v in model.secondary.arrays().items()})
    p["classifier.weight"] = model.classifier.weight
    p["log_inv_temperature"] = theta
    return p


class Trainer:
    """Holds training state so single steps can be driven and inspected in tests."""

    def __init__(self, g: KnowledgeGraph, cfg: TrainConfig, model: SKGModel | None = None):
        cfg.validate()
        if not g.train:
            raise DataError("cannot train on an empty train split")
        self.g, self.cfg = g, cfg
        self.rng = np.random.default_rng(cfg.seed)
        if model is None:
            vocab = train_vocab(g, cfg.vocab_size)
            model = SKGModel.init(
                vocab, g.relation_ids, cfg.dim, cfg.seed, cfg.margin, cfg.init_tau, cfg.max_tokens
            )
        self.model = model
        self.rel_row = {r: i for i, r in enumerate(model.relation_ids)}
        examples = original_examples(g)
        if cfg.expansion:
            examples += set_examples(g, cfg.top_n, cfg.min_group_size, cfg.max_group)
        self.pools = {
            "HP": [ex for ex in examples if ex.direction == HEAD],
            "TP": [ex for ex in examples if ex.direction == TAIL],
            "RP": list(g.train),
        }
        self.answers = {ex: known_answers(g, ex) for ex in self.pools["HP"] + self.pools["TP"]}
        self.theta = np.array(model.loss_cfg.log_inv_temperature, dtype=np.float64)
        self.steps_per_epoch = sum(math.ceil(len(p) / cfg.batch_size) for p in self.pools.values())
        self.opt = OptimizerState(
            total_steps=cfg.epochs * self.steps_per_epoch,
            betas=(cfg.beta1, cfg.beta2),
            eps=cfg.adam_eps,
            weight_decay=cfg.weight_decay,
            adaptive=cfg.adaptive,
            no_decay=frozenset({"log_inv_temperature"}),
        )
        self.weights = init_weights(3)
        self.epoch = 0
        r_head, r_tail = focusing_ratios(g)
        self.focusing = (r_head, 1.0, r_tail)

    # ---- gradients -------------------------------------------------------

    def contrastive_grads(self, batch: list[ExpandedExample]) -> tuple[float, dict]:
        m = self.model
        known, kc = m.forward("main", [ex.known_text for ex in batch])
        target, tc = m.forward("secondary", [_example_target_text(self.g, ex) for ex in batch])
        mask = np.array([[ej.target in self.answers[ei] for ej in batch] for ei in batch])
        res = info_nce_loss(known, target, m.loss_cfg, mask)
        gm = enc.backward(m.main, kc, res.grad_known)
        gs = enc.backward(m.secondary, tc, res.grad_target)
        grads = {f"main.{k}": v for k, v in gm.arrays().items()}
        grads.update({f"secondary.{k}": v for k, v in gs.arrays().items()})
        grads["log_inv_temperature"] = np.array(res.grad_log_inv_temperature)
        return res.loss, grads

    def relation_grads(self, batch) -> tuple[float, dict]:
        m = self.model
        e_ht, cache = m.forward("main", [pair_text(self.g, h, t) for h, _, t in batch])
        labels = np.array([self.rel_row[r] for _, r, _ in batch])
        logits = relation_logits(m.classifier, e_ht)
        loss, d_logits = relation_ce_loss(logits, labels)
        d_w = d_logits.T @ e_ht.astype(np.float64)
        d_e = d_logits @ m.classifier.weight.astype(np.float64)
        gm = enc.backward(m.main, cache, d_e)
        grads = {f"main.{k}": v for k, v in gm.arrays().items()}
        grads["classifier.weight"] = d_w
        return loss, grads

    def task_grads(self, task: str, batch) -> tuple[float, dict]:
        return self.relation_grads(batch) if task == "RP" else self.contrastive_grads(batch)

    def apply(self, grads: dict, weight: float = 1.0) -> None:
        if weight != 1.0:
            grads = {k: v * weight for k, v in grads.items()}
        optimizer_step(model_params(self.model, self.theta), grads, self.opt, self.cfg.learning_rate)
        self.model.loss_cfg.log_inv_temperature = float(self.theta)
        self.model.loss_cfg.clamp()
        self.theta[...] = self.model.loss_cfg.log_inv_temperature

    def step(self, task: str, batch) -> float:
        loss, grads = self.task_grads(task, batch)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite {task} loss at optimizer step {self.opt.step}")
        self.apply(grads, self.weights[task])
        return loss

    # ---- epochs ------------------------------------------------------------

    def epoch_batches(self) -> list[tuple[str, list]]:
        """Shuffle every pool into mini-batches, then shuffle batch order.

        Interleaving whole batches in random order picks each task with
        probability proportional to its pool size.
        """
        bs = self.cfg.batch_size
        batches = []
        for task in ("HP", "RP", "TP"):
            pool = self.pools[task]
            order = self.rng.permutation(len(pool))
            for i in range(0, len(pool), bs):
                batches.append((task, [pool[j] for j in order[i : i + bs]]))
        perm = self.rng.permutation(len(batches))
        return [batches[i] for i in perm]

    def validate(self) -> dict:
        g = self.g
        if not g.valid:
            return {"val_mrr_hp": None, "val_mrr_tp": None, "val_acc_rp": None, "val_mrr": None}
        rep = evaluate(self.model, g, "valid")
        return {
            "val_mrr_hp": rep.head["mrr"],
            "val_mrr_tp": rep.tail["mrr"],
            "val_acc_rp": relation_accuracy(self.model, g, "valid"),
            "val_mrr": rep.average["mrr"],
        }

    def run_epoch(self) -> dict:
        losses = {"HP": [], "RP": [], "TP": []}
        weights = self.weights
        for task, batch in self.epoch_batches():
            losses[task].append(self.step(task, batch))
        self.epoch += 1
        val = self.validate()
        rec = {
            "epoch": self.epoch,
            "task_losses": {k: (float(np.mean(v)) if v else None) for k, v in losses.items()},
            "weights": dict(zip(weights.tasks, weights.weights)),
            "tau": self.model.loss_cfg.tau,
            **val,
        }
        if self.cfg.balancing and self.cfg.epochs >= 2 and val["val_mrr"] is not None:
            acc = [task_accuracy_signal(val["val_mrr_hp"]), task_accuracy_signal(val["val_acc_rp"]),
                   task_accuracy_signal(val["val_mrr_tp"])]
            self.weights = update_weights(acc, self.focusing)
        return rec

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            model=copy.deepcopy(self.model),
            epoch=self.epoch,
            weights=self.weights,
            rng_state=copy.deepcopy(self.rng.bit_generator.state),
            config=self.cfg.to_dict(),
        )


def train(g: KnowledgeGraph, cfg: TrainConfig, on_epoch=None) -> TrainResult:
    """Train for ``cfg.epochs`` epochs; keeps the checkpoint with the best mean validation MRR."""
    tr = Trainer(g, cfg)
    log, best, best_mrr = [], None, -1.0
    for _ in range(cfg.epochs):
        rec = tr.run_epoch()
        log.append(rec)
        logger.info("epoch %d losses=%s val_mrr=%s", rec["epoch"], rec["task_losses"], rec["val_mrr"])
        if on_epoch is not None:
            on_epoch(rec)
        # without a validation split the latest epoch counts as best
        score = rec["val_mrr"] if rec["val_mrr"] is not None else rec["epoch"]
        if best is None or score > best_mrr:
            best, best_mrr = tr.checkpoint(), score
    final = tr.checkpoint()
    return TrainResult(final, best, log)
