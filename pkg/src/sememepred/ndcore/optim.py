"""Adam optimizer with bias correction."""
from __future__ import annotations

import numpy as np

from .params import ParamSet


class MissingGradError(ValueError):
    """adam_step was called while some parameter had no gradient."""


class AdamState:
    """First/second moment buffers plus the shared step counter.

    theta_t = theta_{t-1} - alpha * m_hat / (sqrt(v_hat) + eps)
    with m_hat = m_t / (1 - beta1^t) and v_hat = v_t / (1 - beta2^t).
    """

    def __init__(self, params: ParamSet, alpha: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}


def adam_step(params: ParamSet, state: AdamState) -> None:
    """One bias-corrected Adam update over every parameter; zeroes grads."""
    for name, p in params.items():
        if p.grad is None:
            raise MissingGradError(f"parameter {name!r} has no gradient")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data = p.data - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = None
