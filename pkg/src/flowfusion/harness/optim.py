"""Adam with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..tensor import NonFiniteError, Parameter

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, weight_decay: float = 0.0) -> None:
    """One bias-corrected Adam update in place; decay is applied as ``-lr * wd * p``."""
    state.step += 1
    c1 = 1.0 - BETA1 ** state.step
    c2 = 1.0 - BETA2 ** state.step
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ValueError(f"{p.name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.m.setdefault(p.name, np.zeros_like(p.data))
        v = state.v.setdefault(p.name, np.zeros_like(p.data))
        with np.errstate(over="ignore", invalid="ignore"):
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + EPS)
            if weight_decay:
                update = update + weight_decay * p.data
            step = lr * update
        if not (np.all(np.isfinite(step)) and np.all(np.isfinite(v))):
            raise NonFiniteError(f"{p.name}: non-finite optimizer update")
        p.data -= step


class Adam:
    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4, weight_decay: float = 1e-5):
        if lr < 0 or weight_decay < 0:
            raise ValueError("learning rate and weight decay must be >= 0")
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.state = AdamState()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr, self.weight_decay)
