"""Training loop for the sequence models (soft or hard loss)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .data.corpus import EOS_ID, Example, Vocab
from .data.label_embeddings import pretrain_label_embeddings
from .evaluate import micro_prf
from .loss import label_bag, sequence_loss
from .model import HyperParams, build_params, predict, teacher_forced_probs
from .ndcore import AdamState, ParamSet, Tape, adam_step, add, constant, mul

logger = logging.getLogger(__name__)


class TrainingDiverged(ArithmeticError):
    """Raised when a batch produces a non-finite loss; carries diagnostics."""

    def __init__(self, message: str, batch_words: list[str]):
        super().__init__(message)
        self.batch_words = batch_words


@dataclass
class TrainResult:
    params: ParamSet
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_f1: float = -1.0


def example_loss(params: ParamSet, ex: Example, vocab_size: int,
                 mode: str, feed_own: bool = False):
    gold_seq = list(ex.labels) + [EOS_ID]
    probs = teacher_forced_probs(ex.descriptions, gold_seq, params,
                                 feed_own=feed_own)
    bag = label_bag(ex.labels, vocab_size)
    return sequence_loss(probs, gold_seq, bag, mode=mode)


def train_seq2seq(train: Sequence[Example], dev: Sequence[Example],
                  hyper: HyperParams, char_vocab: Vocab, label_vocab: Vocab,
                  resources: int, loss_mode: str = "soft", seed: int = 0,
                  pretrain_embeddings: bool = True, feed_own: bool = False,
                  log_fn: Optional[Callable[[dict], None]] = None,
                  target_dev_f1: Optional[float] = None) -> TrainResult:
    """Train an attention seq2seq labeller.

    The decoder label embeddings start from skip-gram pretraining over the
    gold label sequences (then fine-tune); parameters are taken from the
    epoch with the highest dev micro-F1. Raises TrainingDiverged on a
    non-finite batch loss. target_dev_f1 stops early once the dev score
    reaches it (overfitting runs that only need to hit a mark).
    """
    if not train:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(seed)
    vocab_size = len(label_vocab)

    label_init = None
    if pretrain_embeddings:
        sgns_seed = int(rng.integers(0, 2 ** 31))
        label_init = pretrain_label_embeddings(
            list(train), hyper.label_embed_dim, sgns_seed, vocab_size=vocab_size)
    params = build_params(hyper, len(char_vocab), vocab_size, resources, rng,
                          kind="seq2seq", label_embed_init=label_init)
    state = AdamState(params, alpha=hyper.learning_rate)

    def dev_f1() -> float:
        if not dev:
            return 0.0
        preds = [set(predict(ex.descriptions, params, l_max=hyper.l_max).label_ids)
                 for ex in dev]
        return micro_prf(preds, [set(ex.labels) for ex in dev]).f1

    result = TrainResult(params=params)
    best = params.snapshot()
    if hyper.epochs == 0:
        logger.warning("epochs=0: returning initial parameters")
    indices = np.arange(len(train))
    for epoch in range(1, hyper.epochs + 1):
        rng.shuffle(indices)
        total_loss = 0.0
        for start in range(0, len(indices), hyper.batch_size):
            batch = [int(i) for i in indices[start:start + hyper.batch_size]]
            with Tape() as tape:
                acc = None
                for i in batch:
                    term = example_loss(params, train[i], vocab_size, loss_mode,
                                        feed_own=feed_own)
                    acc = term if acc is None else add(acc, term)
                batch_loss = mul(acc, constant(1.0 / len(batch)))
                value = batch_loss.item()
                if not np.isfinite(value):
                    words = [train[i].word for i in batch]
                    raise TrainingDiverged(
                        f"non-finite loss {value} in epoch {epoch} "
                        f"on batch {words}", words)
                tape.backward(batch_loss)
            adam_step(params, state)
            total_loss += value * len(batch)
        f1 = dev_f1()
        row = {"epoch": epoch, "train_loss": round(total_loss / len(train), 6),
               "dev_f1": round(f1, 4)}
        result.history.append(row)
        if log_fn:
            log_fn(row)
        if f1 > result.best_dev_f1:
            result.best_dev_f1 = f1
            result.best_epoch = epoch
            best = params.snapshot()
        if target_dev_f1 is not None and f1 >= target_dev_f1:
            break
    params.restore(best)
    return result


def seq2seq_predictor(params: ParamSet, l_max: int = 8):
    """Closure mapping an Example to its predicted label-id set."""
    def predict_fn(ex: Example) -> set[int]:
        return set(predict(ex.descriptions, params, l_max=l_max).label_ids)
    return predict_fn
