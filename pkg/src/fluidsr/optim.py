"""Adam optimizer with standard bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter index."""

    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Apply one Adam update in place and return the advanced state.

    `params` is a sequence of Tensors, `grads` maps each Tensor to its
    gradient array (as produced by `backprop`).
    """
    state.step += 1
    t = state.step
    for i, p in enumerate(params):
        g = np.asarray(grads[p], dtype=np.float64)
        m = state.m.get(i)
        v = state.v.get(i)
        if m is None:
            m = np.zeros(p.shape)
            v = np.zeros(p.shape)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[i] = m
        state.v[i] = v
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        p.data = p.data - lr * mhat / (np.sqrt(vhat) + eps)
    return state
