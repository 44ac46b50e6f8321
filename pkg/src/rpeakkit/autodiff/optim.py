"""Adam optimizer and the step learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from ..errors import ConfigError, NumericsError, ShapeError

BASE_LR = 0.05
LR_DECAY = 0.1
LR_STEP_EPOCHS = 150


def lr_at(epoch: int, base_lr: float = BASE_LR, decay: float = LR_DECAY,
          step_epochs: int = LR_STEP_EPOCHS) -> float:
    """Learning rate for ``epoch``: ``base_lr`` decayed by ``decay`` every ``step_epochs``."""
    if epoch < 0:
        raise ConfigError("epoch must be non-negative")
    return base_lr * decay ** (epoch // step_epochs)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place.

    A parameter with no gradient entry is treated as having a zero gradient.
    """
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient for {name!r}")

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state
