"""SGD with momentum and Adam, updating parameters in place."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class OptimState:
    algorithm: str = "adam"  # "adam" | "sgd_momentum"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd_momentum"):
            raise ValueError(f"unknown optimizer {self.algorithm!r}")


def optimizer_step(model, grads, state: OptimState):
    for name, g in grads.items():
        if name not in model.tensors or model.tensors[name].shape != g.shape:
            raise ShapeMismatch(f"gradient {name} {np.shape(g)} does not match parameter")
    state.step += 1
    lr = state.learning_rate
    for name, g in grads.items():
        w = model.tensors[name]
        if state.algorithm == "sgd_momentum":
            v = state.m.get(name)
            if v is None:
                v = state.m[name] = np.zeros_like(w)
            v *= state.momentum
            v -= lr * g
            w += v
        else:
            m = state.m.setdefault(name, np.zeros_like(w))
            v = state.v.setdefault(name, np.zeros_like(w))
            m *= state.beta1
            m += (1 - state.beta1) * g
            v *= state.beta2
            v += (1 - state.beta2) * g * g
            m_hat = m / (1 - state.beta1 ** state.step)
            v_hat = v / (1 - state.beta2 ** state.step)
            w -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return model, state
