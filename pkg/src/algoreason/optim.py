"""Adam optimizer and weight initialization.

The update uses the step-size form of bias correction:
alpha_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t); p -= alpha_t * m / (sqrt(v) + eps).
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .rng import Rng

DEFAULT_LR = 3e-4


@dataclass
class AdamState:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState) -> AdamState:
    """One in-place Adam update of ``params`` from ``grads``; returns the state."""
    state.t += 1
    alpha = state.lr * np.sqrt(1.0 - state.beta2**state.t) / (1.0 - state.beta1**state.t)
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ValueError(f"{name}: grad shape {g.shape} vs param {p.data.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= alpha * m / (np.sqrt(v) + state.eps)
    return state


def xavier_uniform(rng: Rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))
