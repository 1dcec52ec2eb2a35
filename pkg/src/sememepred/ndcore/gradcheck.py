"""Central finite-difference oracle for analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParamSet
from .tensor import NonFiniteError, Tape, Tensor


def grad_check(f: Callable[[ParamSet], Tensor], params: ParamSet,
               epsilon: float = 1e-5, max_coords_per_param: int = 24,
               seed: int = 0) -> float:
    """Compare analytic gradients of f against central differences.

    f must rebuild its forward pass from the current parameter values on
    every call and return a scalar tensor. Returns the max over sampled
    coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    if not (1e-7 <= epsilon <= 1e-4):
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-4]")

    params.zero_grads()
    with Tape() as tape:
        loss = f(params)
        tape.backward(loss)
    analytic = {}
    for name, p in params.items():
        analytic[name] = (p.grad.copy() if p.grad is not None
                          else np.zeros_like(p.data))
    params.zero_grads()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = np.sort(rng.choice(n, size=max_coords_per_param, replace=False))
        a_flat = analytic[name].reshape(-1)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + epsilon
            f_plus = f(params).item()
            flat[idx] = original - epsilon
            f_minus = f(params).item()
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            if not np.isfinite(numeric):
                raise NonFiniteError(
                    f"numeric gradient for {name}[{idx}] is not finite")
            a = float(a_flat[idx])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
