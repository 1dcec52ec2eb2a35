"""Tensor arithmetic with a reverse-mode tape, Adam, and a gradient oracle."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .optim import AdamState, MissingGradError, adam_step
from .params import INIT_SCALE, ParamSet, constant, uniform_param, zeros_param
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    add,
    attention_weights,
    checked_enabled,
    concat,
    default_dtype,
    embedding_lookup,
    forward_op,
    gru_sequence,
    log,
    matmul,
    mul,
    op_kinds,
    set_checked,
    set_default_dtype,
    sigmoid,
    sigmoid_linear,
    slice_axis,
    softmax,
    tanh,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "INIT_SCALE",
    "MissingGradError",
    "NonFiniteError",
    "ParamSet",
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "adam_step",
    "add",
    "attention_weights",
    "checked_enabled",
    "concat",
    "constant",
    "default_dtype",
    "embedding_lookup",
    "forward_op",
    "grad_check",
    "gru_sequence",
    "load_checkpoint",
    "log",
    "matmul",
    "mul",
    "op_kinds",
    "save_checkpoint",
    "set_checked",
    "set_default_dtype",
    "sigmoid",
    "sigmoid_linear",
    "slice_axis",
    "softmax",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
    "uniform_param",
    "zeros_param",
]
