"""Named collections of learnable tensors and parameter initialization."""
from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from .tensor import Tensor, default_dtype

INIT_SCALE = 0.08  # uniform(-0.08, 0.08), all weights, one root seed


class ParamSet:
    """Ordered name -> Tensor mapping holding a model's learnable state."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if "=" in name or "\n" in name:
            raise ValueError(f"parameter name {name!r} contains reserved characters")
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def tensors(self) -> Iterator[Tensor]:
        return iter(self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t.data)) for t in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy of every parameter's values, for best-epoch bookkeeping."""
        return {name: t.data.copy() for name, t in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, arr in snap.items():
            self._params[name].data = arr.copy()


def uniform_param(shape, rng: np.random.Generator,
                  scale: float = INIT_SCALE) -> Tensor:
    """Fresh learnable tensor initialized uniform(-scale, scale)."""
    data = rng.uniform(-scale, scale, size=shape).astype(default_dtype())
    return Tensor(data, requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=default_dtype()), requires_grad=True)


def constant(data, dtype=None) -> Tensor:
    """Non-learnable tensor (targets, masks, fixed inputs)."""
    arr = np.asarray(data, dtype=dtype or default_dtype())
    return Tensor(arr, requires_grad=False)
