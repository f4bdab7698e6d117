"""Bias-corrected Adam over named parameter lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState) -> None:
    """One in-place Adam update.

    ``params`` and ``grads`` are equal-length lists of (name, array) pairs
    with matching shapes; moment buffers are created lazily on first use.
    """
    if len(params) != len(grads):
        raise ValueError("params and grads must pair up")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for (name, p), (gname, g) in zip(params, grads):
        if name != gname or p.shape != g.shape:
            raise ValueError(f"parameter/gradient mismatch for {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
