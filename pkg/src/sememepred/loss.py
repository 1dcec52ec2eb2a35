"""Soft label-distribution loss and the hard cross-entropy baseline.

The soft target for a decoding step averages the one-hot step target with
the uniform distribution over the example's full label bag:

    target'(t) = (bag/M + onehot(t)) / 2

so a prediction that puts mass on an in-bag label at the wrong position is
punished less than one that puts the same mass on an out-of-bag label. The
EOS step keeps the same rule: EOS gets 1/2 and the bag shares the rest.
EOS itself never counts toward the bag or M.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data.corpus import EOS_ID, PAD_ID, UNK_ID
from .ndcore import Tensor, add, constant, log, mul, tsum

LOG_FLOOR = 1e-12  # log argument clamp; recorded in checkpoint metadata


@dataclass
class LabelBag:
    """Indicator vector over the label vocabulary with 1s at gold labels."""
    q: np.ndarray
    m: int


def label_bag(gold_ids: Sequence[int], vocab_size: int) -> LabelBag:
    gold = list(gold_ids)
    if not gold:
        raise ValueError("label bag needs at least one gold label")
    if len(set(gold)) != len(gold):
        raise ValueError("gold labels must be unique")
    q = np.zeros(vocab_size)
    for g in gold:
        if g in (PAD_ID, UNK_ID, EOS_ID):
            raise ValueError(f"reserved id {g} cannot be a gold label")
        if not 0 <= g < vocab_size:
            raise ValueError(f"label id {g} outside vocabulary of size {vocab_size}")
        q[g] = 1.0
    return LabelBag(q=q, m=len(gold))


def soft_target(y_t: np.ndarray, bag: LabelBag) -> np.ndarray:
    """Project a one-hot step target into the averaged bag distribution."""
    y_t = np.asarray(y_t, dtype=float)
    if y_t.shape != bag.q.shape:
        raise ValueError(f"target shape {y_t.shape} != bag shape {bag.q.shape}")
    on = np.flatnonzero(y_t)
    if len(on) != 1 or y_t[on[0]] != 1.0 or np.any(y_t < 0):
        raise ValueError("step target must be exactly one-hot")
    return (bag.q / bag.m + y_t) / 2.0


def hard_target(y_t: np.ndarray, bag: LabelBag) -> np.ndarray:
    """Identity projection: plain one-hot cross entropy."""
    on = np.flatnonzero(y_t)
    if len(on) != 1 or y_t[on[0]] != 1.0:
        raise ValueError("step target must be exactly one-hot")
    return np.asarray(y_t, dtype=float)


_PROJECTIONS: dict[str, Callable[[np.ndarray, LabelBag], np.ndarray]] = {
    "soft": soft_target,
    "hard": hard_target,
}


def step_targets(gold_seq: Sequence[int], bag: LabelBag,
                 mode="soft") -> list[np.ndarray]:
    """Per-step target distributions for a gold sequence (EOS included).

    mode is "soft", "hard", or any callable (one_hot, bag) -> distribution,
    so alternative projection functions plug in without touching the loss.
    """
    project = mode if callable(mode) else _PROJECTIONS[mode]
    targets = []
    for g in gold_seq:
        y = np.zeros_like(bag.q)
        y[g] = 1.0
        targets.append(project(y, bag))
    return targets


def sequence_loss(step_probs: Sequence[Tensor], gold_seq: Sequence[int],
                  bag: LabelBag, mode="soft") -> Tensor:
    """Cross entropy of the step distributions against projected targets.

    step_probs are (1, V) distributions, one per decoding step; gold_seq is
    the gold label ids with the terminating EOS appended. mode picks the
    target projection ("soft", "hard", or a custom callable). The loss is
    differentiable through the probabilities; the log argument is clamped
    at 1e-12.
    """
    if not callable(mode) and mode not in _PROJECTIONS:
        raise ValueError(f"unknown loss mode {mode!r}")
    if len(step_probs) != len(gold_seq):
        raise ValueError(
            f"got {len(step_probs)} step distributions for {len(gold_seq)} targets")
    targets = step_targets(gold_seq, bag, mode)
    total = None
    for p_t, y in zip(step_probs, targets):
        if p_t.shape != (1, bag.q.shape[0]):
            raise ValueError(f"step distribution has shape {p_t.shape}, "
                             f"expected (1, {bag.q.shape[0]})")
        term = tsum(mul(constant(y.reshape(1, -1)), log(p_t, floor=LOG_FLOOR)))
        total = term if total is None else add(total, term)
    return mul(total, constant(-1.0))
