"""Dense tensors with a reverse-mode gradient tape.

Every piece of differentiable math in the package flows through the ops
defined here. Arrays are numpy-backed. A Tape records op applications in
execution order and replays them in exact reverse on backward(); leaf
parameters accumulate gradients across tapes until the optimizer consumes
them.

Checked mode (on by default, meant for tests) scans op inputs and outputs
for NaN/Inf after every application. Release training may switch it off.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

_DEFAULT_DTYPE = np.float64
_CHECKED = True
_TAPE_STACK: list["Tape"] = []


class ShapeError(ValueError):
    """Input shapes do not conform to an op's shape rule."""


class NonFiniteError(ArithmeticError):
    """A NaN or Inf appeared while checked mode is enabled."""


class TapeError(RuntimeError):
    """Tape misuse: empty tape, non-scalar loss, or backward called twice."""


def set_default_dtype(dtype) -> None:
    """Set the dtype newly created tensors use (float64 or float32)."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dt}; use float64 or float32")
    _DEFAULT_DTYPE = dt.type


def default_dtype():
    return _DEFAULT_DTYPE


def set_checked(flag: bool) -> None:
    """Enable or disable the NaN/Inf scan after every op."""
    global _CHECKED
    _CHECKED = bool(flag)


def checked_enabled() -> bool:
    return _CHECKED


class Tensor:
    """n-dimensional real array that can participate in a gradient tape."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, np.ndarray) and data.dtype in (np.float64, np.float32):
            arr = data
        else:
            arr = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; everything routes through the module-level ops.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), _as_tensor(-1.0)))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_DEFAULT_DTYPE))


class Tape:
    """Ordered record of executed ops, traversed in exact reverse on backward.

    Use as a context manager around the forward pass:

        with Tape() as tape:
            loss = ...
            tape.backward(loss)

    Ops record onto the innermost active tape only when at least one input
    requires grad. backward() may run once per tape; it releases all
    recorded references when it finishes.
    """

    def __init__(self):
        self._entries: list[tuple] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _TAPE_STACK.pop()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def consumed(self) -> bool:
        return self._consumed

    def clear(self) -> None:
        """Drop all recorded entries (freeing intermediates) and allow reuse."""
        self._entries = []
        self._consumed = False

    def backward(self, loss: Tensor) -> None:
        if self._consumed:
            raise TapeError("backward was already called on this tape")
        if not self._entries:
            raise TapeError("cannot run backward on an empty tape")
        if loss.data.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for inputs, out, backward_fn in reversed(self._entries):
            if out.grad is None:
                continue  # branch never reached the loss
            grads = backward_fn(out.grad)
            for t, g in zip(inputs, grads):
                if g is None or not t.requires_grad:
                    continue
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += g
        self._consumed = True
        self._entries = []


def _active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _scan(kind: str, arr: np.ndarray, role: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{kind}: non-finite values in {role}")


def _finish(kind: str, inputs: tuple, out_data: np.ndarray,
            backward_fn: Callable) -> Tensor:
    if _CHECKED:
        for t in inputs:
            _scan(kind, t.data, "input")
        _scan(kind, out_data, "output")
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=requires)
    tape = _active_tape()
    if tape is not None and requires:
        tape._entries.append((inputs, out, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum out broadcast dimensions so grad matches the input's shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def _softmax_np(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Primitive ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims disagree, {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _finish("matmul", (a, b), out, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes do not broadcast, {a.shape} vs {b.shape}")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _finish("add", (a, b), out, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes do not broadcast, {a.shape} vs {b.shape}")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _finish("mul", (a, b), out, backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise ShapeError("concat: needs at least one input")
    base = tensors[0].data.ndim
    for t in tensors[1:]:
        if t.data.ndim != base:
            raise ShapeError(
                f"concat: rank mismatch, {tensors[0].shape} vs {t.shape}")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(
            "concat: shapes not compatible along axis "
            f"{axis}: {[t.shape for t in tensors]}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _finish("concat", tensors, out, backward)


def slice_axis(t: Tensor, axis: int, start: int, stop: int) -> Tensor:
    dim = t.shape[axis]
    if not (0 <= start < stop <= dim):
        raise ShapeError(
            f"slice: range [{start}:{stop}) invalid for axis {axis} of {t.shape}")
    index = [slice(None)] * t.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = t.data[index].copy()

    def backward(g):
        full = np.zeros_like(t.data)
        full[index] = g
        return (full,)

    return _finish("slice", (t,), out, backward)


def transpose(t: Tensor) -> Tensor:
    if t.data.ndim != 2:
        raise ShapeError(f"transpose: needs a 2-d tensor, got {t.shape}")
    out = t.data.T.copy()

    def backward(g):
        return (g.T,)

    return _finish("transpose", (t,), out, backward)


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _finish("tanh", (t,), out, backward)


def sigmoid(t: Tensor) -> Tensor:
    out = _sigmoid_np(t.data)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _finish("sigmoid", (t,), out, backward)


def softmax(t: Tensor) -> Tensor:
    """Softmax over the last axis; rows sum to 1."""
    if t.shape[-1] < 1:
        raise ShapeError(f"softmax: empty rows in shape {t.shape}")
    out = _softmax_np(t.data)

    def backward(g):
        inner = np.sum(g * out, axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _finish("softmax", (t,), out, backward)


def log(t: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log; with floor > 0 the argument is clamped at the floor."""
    if floor > 0.0:
        arg = np.maximum(t.data, floor)
        mask = t.data > floor
    else:
        arg = t.data
        mask = None
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(arg)

    def backward(g):
        gi = g / arg
        if mask is not None:
            gi = gi * mask
        return (gi,)

    return _finish("log", (t,), out, backward)


def tsum(t: Tensor, axis: Optional[int] = None) -> Tensor:
    out = np.sum(t.data, axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, t.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), t.shape).copy(),)

    return _finish("sum", (t,), out, backward)


def tmean(t: Tensor, axis: Optional[int] = None) -> Tensor:
    n = t.data.size if axis is None else t.shape[axis]
    out = np.mean(t.data, axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, t.shape).copy() / n,)
        return (np.broadcast_to(np.expand_dims(g, axis), t.shape).copy() / n,)

    return _finish("mean", (t,), out, backward)


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    if table.data.ndim != 2:
        raise ShapeError(f"embedding: table must be 2-d, got {table.shape}")
    ids = [int(i) for i in ids]
    rows = table.shape[0]
    for i in ids:
        if not 0 <= i < rows:
            raise ValueError(f"embedding: id {i} out of range for table of {rows} rows")
    out = table.data[ids].copy()

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _finish("embedding", (table,), out, backward)


def gru_sequence(x: Tensor, h0: Tensor, w_zr: Tensor, b_zr: Tensor,
                 w_c: Tensor, b_c: Tensor, reverse: bool = False) -> Tensor:
    """Run a GRU over a sequence in one op; returns all hidden states.

    x is (l, e); h0 is (1, h). Weight layout: w_zr maps [x_t ; h_{t-1}]
    (e+h) to the update and reset pre-activations (2h); w_c maps
    [x_t ; r*h_{t-1}] to the candidate pre-activation (h). Cell:

        z = sigmoid(.), r = sigmoid(.), hbar = tanh(.),
        h_t = (1 - z) * h_{t-1} + z * hbar

    With reverse=True the rows are consumed last-to-first and the returned
    states stay aligned to input positions (row i holds the state after
    consuming rows l-1..i), which is exactly what a bidirectional encoder
    needs. The whole sequence is a single tape entry; its backward runs
    truncation-free BPTT internally.
    """
    if x.data.ndim != 2 or h0.data.ndim != 2 or h0.shape[0] != 1:
        raise ShapeError(f"gru: x must be (l, e) and h0 (1, h), got {x.shape}, {h0.shape}")
    l, e = x.shape
    h = h0.shape[1]
    if w_zr.shape != (e + h, 2 * h):
        raise ShapeError(f"gru: w_zr must be ({e + h}, {2 * h}), got {w_zr.shape}")
    if b_zr.shape != (2 * h,):
        raise ShapeError(f"gru: b_zr must be ({2 * h},), got {b_zr.shape}")
    if w_c.shape != (e + h, h):
        raise ShapeError(f"gru: w_c must be ({e + h}, {h}), got {w_c.shape}")
    if b_c.shape != (h,):
        raise ShapeError(f"gru: b_c must be ({h},), got {b_c.shape}")

    order = list(range(l - 1, -1, -1) if reverse else range(l))
    # input projections for the whole sequence in two gemms; the loop only
    # carries the recurrent part
    w_xzr, w_hzr = w_zr.data[:e], w_zr.data[e:]
    w_xc, w_hc = w_c.data[:e], w_c.data[e:]
    xz_all = x.data @ w_xzr + b_zr.data
    xc_all = x.data @ w_xc + b_c.data
    states = np.empty((l, h), dtype=x.data.dtype)
    saved = []
    h_prev = h0.data
    for row in order:
        zr = _sigmoid_np(xz_all[row] + h_prev @ w_hzr)
        z, r = zr[:, :h], zr[:, h:]
        rh = r * h_prev
        hbar = np.tanh(xc_all[row] + rh @ w_hc)
        h_new = (1.0 - z) * h_prev + z * hbar
        states[row] = h_new[0]
        saved.append((row, h_prev, z, r, rh, hbar))
        h_prev = h_new

    def backward(g):
        dzr_all = np.empty((l, 2 * h), dtype=x.data.dtype)
        dcand_all = np.empty((l, h), dtype=x.data.dtype)
        hprev_all = np.empty((l, h), dtype=x.data.dtype)
        rh_all = np.empty((l, h), dtype=x.data.dtype)
        w_hzr_t = w_hzr.T
        w_hc_t = w_hc.T
        dh_carry = np.zeros((1, h), dtype=x.data.dtype)
        for row, h_prev, z, r, rh, hbar in reversed(saved):
            dh_total = dh_carry + g[row:row + 1]
            dz = dh_total * (hbar - h_prev)
            dhbar = dh_total * z
            dh_prev = dh_total * (1.0 - z)
            dcand = dhbar * (1.0 - hbar * hbar)
            drh = dcand @ w_hc_t
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            dzr_all[row, :h] = (dz * z * (1.0 - z))[0]
            dzr_all[row, h:] = (dr * r * (1.0 - r))[0]
            dcand_all[row] = dcand[0]
            hprev_all[row] = h_prev[0]
            rh_all[row] = rh[0]
            dh_carry = dh_prev + dzr_all[row:row + 1] @ w_hzr_t
        dx = dzr_all @ w_xzr.T + dcand_all @ w_xc.T
        dw_zr = np.concatenate([x.data.T @ dzr_all, hprev_all.T @ dzr_all], axis=0)
        dw_c = np.concatenate([x.data.T @ dcand_all, rh_all.T @ dcand_all], axis=0)
        return (dx, dh_carry, dw_zr, dzr_all.sum(axis=0), dw_c,
                dcand_all.sum(axis=0))

    return _finish("gru_sequence", (x, h0, w_zr, b_zr, w_c, b_c), states, backward)


def attention_weights(query: Tensor, keys: Tensor, w_a: Tensor,
                      v_a: Tensor) -> Tensor:
    """Additive attention in one op: softmax(v_a^T tanh(keys + query @ w_a)).

    query is (1, h); keys are the precomputed key projections (l, a);
    returns the weight row (1, l), nonnegative and summing to 1.
    """
    if query.data.ndim != 2 or query.shape[0] != 1:
        raise ShapeError(f"attention: query must be (1, h), got {query.shape}")
    if keys.data.ndim != 2 or w_a.shape != (query.shape[1], keys.shape[1]):
        raise ShapeError(f"attention: w_a {w_a.shape} does not map query "
                         f"{query.shape} onto keys {keys.shape}")
    if v_a.shape != (keys.shape[1], 1):
        raise ShapeError(f"attention: v_a must be ({keys.shape[1]}, 1), "
                         f"got {v_a.shape}")
    q = query.data @ w_a.data
    th = np.tanh(keys.data + q)
    scores = th @ v_a.data            # (l, 1)
    alpha = _softmax_np(scores.T)     # (1, l)

    def backward(g):
        inner = np.sum(g * alpha, axis=-1, keepdims=True)
        dscores = (alpha * (g - inner)).T
        dth = dscores @ v_a.data.T
        dv_a = th.T @ dscores
        dpre = dth * (1.0 - th * th)
        dq = dpre.sum(axis=0, keepdims=True)
        return dq @ w_a.data.T, dpre, query.data.T @ dq, dv_a

    return _finish("attention", (query, keys, w_a, v_a), alpha, backward)


def sigmoid_linear(cond: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused gate: sigmoid(cond @ w + b)."""
    if cond.data.ndim != 2 or w.data.ndim != 2 or cond.shape[1] != w.shape[0]:
        raise ShapeError(f"sigmoid_linear: cond {cond.shape} does not match "
                         f"w {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"sigmoid_linear: b must be ({w.shape[1]},), got {b.shape}")
    out = _sigmoid_np(cond.data @ w.data + b.data)

    def backward(g):
        dz = g * out * (1.0 - out)
        return dz @ w.data.T, cond.data.T @ dz, dz.sum(axis=0)

    return _finish("sigmoid_linear", (cond, w, b), out, backward)


_FORWARD_OPS: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": concat,
    "slice": slice_axis,
    "transpose": transpose,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softmax": softmax,
    "log": log,
    "sum": tsum,
    "mean": tmean,
    "embedding": embedding_lookup,
    "gru_sequence": gru_sequence,
    "attention": attention_weights,
    "sigmoid_linear": sigmoid_linear,
}


def op_kinds() -> tuple[str, ...]:
    return tuple(_FORWARD_OPS)


def forward_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Apply a primitive op by kind name."""
    try:
        fn = _FORWARD_OPS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}; known: {sorted(_FORWARD_OPS)}")
    return fn(*inputs, **kwargs)
