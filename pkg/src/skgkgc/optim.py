"""AdamW with linear learning-rate decay, plus a plain SGD mode."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    total_steps: int
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    adaptive: bool = True
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    no_decay: frozenset = frozenset()

    def lr_at(self, lr: float) -> float:
        """Learning rate for the current step, decaying linearly to 0."""
        if self.total_steps <= 0:
            return lr
        return lr * max(0.0, 1.0 - self.step / self.total_steps)


def optimizer_step(params: dict, grads: dict, state: OptimizerState, lr: float) -> OptimizerState:
    """Update ``params`` in place from ``grads``.

    Weight decay is decoupled: parameters shrink by ``lr * weight_decay``
    independently of the gradient. With ``adaptive=False`` the step is plain
    gradient descent, which keeps updates linear in the gradient.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        if params[name].shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {params[name].shape} for {name}")
    lr_t = state.lr_at(lr)
    state.step += 1
    b1, b2 = state.betas
    for name, g in grads.items():
        p = params[name]
        g = np.asarray(g, dtype=p.dtype)
        if state.weight_decay and name not in state.no_decay:
            p *= p.dtype.type(1.0 - lr_t * state.weight_decay)
        if not state.adaptive:
            p -= p.dtype.type(lr_t) * g
            continue
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**state.step)
        v_hat = v / (1 - b2**state.step)
        p -= (lr_t * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
    return state
