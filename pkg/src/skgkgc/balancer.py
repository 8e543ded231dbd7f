"""Dynamic multi-task loss weights from previous-epoch validation accuracy.

Each task's difficulty is a focal-style term ``-(1 - a)^r * log(a)`` of its
last validation accuracy ``a``; weights are the softmax of the difficulties
scaled by the number of tasks, so they always sum to K.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-6
TASKS = ("HP", "RP", "TP")


def clamp_accuracy(a: float, eps: float = EPS) -> float:
    return min(max(float(a), eps), 1.0 - eps)


def difficulty(a_prev: float, r_k: float, eps: float = EPS) -> float:
    a = clamp_accuracy(a_prev, eps)
    return -((1.0 - a) ** r_k) * math.log(a)


@dataclass(frozen=True)
class TaskWeights:
    weights: tuple[float, ...]
    difficulties: tuple[float, ...] | None = None
    focusing: tuple[float, ...] | None = None
    accuracies: tuple[float, ...] | None = None
    tasks: tuple[str, ...] = field(default=TASKS)

    def __getitem__(self, task: str) -> float:
        return self.weights[self.tasks.index(task)]

    @property
    def hp(self) -> float:
        return self["HP"]

    @property
    def rp(self) -> float:
        return self["RP"]

    @property
    def tp(self) -> float:
        return self["TP"]

    @property
    def K(self) -> int:
        return len(self.weights)

    def log_record(self, epoch: int) -> dict:
        rec = {"epoch": epoch}
        for name, w in zip(self.tasks, self.weights):
            rec[f"w_{name.lower()}"] = w
        for i, name in enumerate(self.tasks):
            rec[f"a_{name.lower()}"] = None if self.accuracies is None else self.accuracies[i]
        return rec

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "TaskWeights":
        d = json.loads(s)
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def init_weights(K: int = 3, tasks: tuple[str, ...] | None = None) -> TaskWeights:
    if K < 1:
        raise ValueError("need at least one task")
    if tasks is None:
        tasks = TASKS if K == 3 else tuple(f"T{i}" for i in range(K))
    return TaskWeights(weights=(1.0,) * K, tasks=tuple(tasks))


def update_weights(accuracies, focusing, K: int | None = None, tasks: tuple[str, ...] | None = None) -> TaskWeights:
    acc = tuple(clamp_accuracy(a) for a in accuracies)
    foc = tuple(float(r) for r in focusing)
    if len(acc) != len(foc):
        raise ValueError("one focusing parameter per task required")
    K = len(acc) if K is None else K
    d = np.array([difficulty(a, r) for a, r in zip(acc, foc)])
    e = np.exp(d - d.max())
    w = K * e / e.sum()
    if tasks is None:
        tasks = TASKS if len(acc) == 3 else tuple(f"T{i}" for i in range(len(acc)))
    return TaskWeights(tuple(float(x) for x in w), tuple(float(x) for x in d), foc, acc, tuple(tasks))


def task_accuracy_signal(value, eps: float = EPS) -> float:
    """Clamp a validation metric (MRR or classification accuracy) into ``[eps, 1-eps]``."""
    if value is None:
        raise ValueError("missing validation result")
    if hasattr(value, "mrr"):
        value = value.mrr
    v = float(value)
    if not math.isfinite(v):
        raise ValueError("validation signal is not finite")
    return clamp_accuracy(v, eps)
