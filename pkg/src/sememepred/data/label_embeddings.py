"""Skip-gram-with-negative-sampling pretraining over gold label sequences.

The window is the whole sequence (label sets are small), 5 negatives per
positive, 5 epochs, learning rate 0.025 with linear decay. The returned
matrix covers the full label vocabulary including reserved ids; rows for
labels never observed keep their random initialization.
"""
from __future__ import annotations

import logging

import numpy as np

from .corpus import Example, RESERVED_TOKENS

logger = logging.getLogger(__name__)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def pretrain_label_embeddings(examples: list[Example], dim: int, seed: int,
                              vocab_size: int | None = None, epochs: int = 5,
                              negatives: int = 5, lr: float = 0.025) -> np.ndarray:
    """Return a (vocab_size, dim) embedding matrix trained on co-occurrence.

    epochs=0 returns the random initialization unchanged.
    """
    if not examples:
        raise ValueError("cannot pretrain label embeddings on an empty train set")
    if dim < 2:
        raise ValueError(f"embedding dim must be >= 2, got {dim}")
    if vocab_size is None:
        vocab_size = max(max(ex.labels) for ex in examples) + 1

    rng = np.random.default_rng(seed)
    emb_in = (rng.uniform(-0.5, 0.5, size=(vocab_size, dim)) / dim)
    if epochs == 0:
        return emb_in
    emb_out = np.zeros((vocab_size, dim))

    counts = np.zeros(vocab_size)
    for ex in examples:
        for lab in ex.labels:
            counts[lab] += 1
    observed = np.flatnonzero(counts)
    unseen = [i for i in range(len(RESERVED_TOKENS), vocab_size) if counts[i] == 0]
    if unseen:
        logger.warning("%d labels never observed; their embeddings stay at "
                       "random init", len(unseen))
    noise = counts[observed] ** 0.75
    noise = noise / noise.sum()

    sequences = [ex.labels for ex in examples if len(ex.labels) >= 2]
    if not sequences:
        return emb_in
    total_steps = epochs * len(sequences)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(sequences))
        for si in order:
            alpha = max(lr * (1.0 - step / total_steps), lr * 1e-2)
            step += 1
            seq = sequences[int(si)]
            for i, center in enumerate(seq):
                for j, ctx in enumerate(seq):
                    if i == j:
                        continue
                    v = emb_in[center]
                    grad_v = np.zeros(dim)
                    # positive pair
                    u = emb_out[ctx]
                    g = (_sigmoid(v @ u) - 1.0) * alpha
                    grad_v += g * u
                    emb_out[ctx] = u - g * v
                    # negatives from the unigram^0.75 table
                    negs = observed[rng.choice(len(observed), size=negatives,
                                               p=noise)]
                    for neg in negs:
                        if neg == ctx:
                            continue
                        u = emb_out[neg]
                        g = _sigmoid(v @ u) * alpha
                        grad_v += g * u
                        emb_out[neg] = u - g * v
                    emb_in[center] = v - grad_v
    if not np.all(np.isfinite(emb_in)):
        raise ArithmeticError("label embedding pretraining diverged")
    return emb_in
