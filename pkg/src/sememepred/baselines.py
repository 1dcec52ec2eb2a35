"""Classical multi-label baselines over character n-gram features, plus the
trainer for the encoder+logistic-regression model.

ML-KNN, binary relevance, label powerset and classifier chains all share
one feature representation (character unigram + bigram term frequencies,
feature space built from the training split only) so their comparison is
fair. The linear classifiers are logistic/softmax regressions trained
full-batch with Adam through the tensor core.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from .data.corpus import Example
from .evaluate import micro_prf
from .model import HyperParams, build_params, mllr_predict_set, rnn_mllr_forward
from .ndcore import (
    AdamState,
    ParamSet,
    Tape,
    Tensor,
    adam_step,
    add,
    constant,
    log,
    matmul,
    mul,
    sigmoid,
    softmax,
    tsum,
    zeros_param,
)

logger = logging.getLogger(__name__)

_LOG_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

class FeatureSpace:
    """Character uni+bigram vocabulary, built from the training split only."""

    def __init__(self):
        self.index: dict[tuple, int] = {}

    @classmethod
    def build(cls, examples: Sequence[Example]) -> "FeatureSpace":
        space = cls()
        for ex in examples:
            for key in _feature_keys(ex):
                if key not in space.index:
                    space.index[key] = len(space.index)
        return space

    def __len__(self) -> int:
        return len(self.index)


def _feature_keys(ex: Example):
    for desc in ex.descriptions:
        for c in desc:
            yield ("u", c)
        for a, b in zip(desc, desc[1:]):
            yield ("b", a, b)


def featurize(ex: Example, space: FeatureSpace) -> np.ndarray:
    """Dense term-frequency vector; unseen features are dropped."""
    vec = np.zeros(len(space))
    for key in _feature_keys(ex):
        idx = space.index.get(key)
        if idx is not None:
            vec[idx] += 1.0
    return vec


def baseline_dataset(examples: Sequence[Example], space: FeatureSpace
                     ) -> tuple[np.ndarray, list[set[int]]]:
    x = np.stack([featurize(ex, space) for ex in examples]) if examples else \
        np.zeros((0, len(space)))
    return x, [set(ex.labels) for ex in examples]


# ---------------------------------------------------------------------------
# ML-KNN
# ---------------------------------------------------------------------------

def _cosine_distances(queries: np.ndarray, base: np.ndarray) -> np.ndarray:
    qn = np.linalg.norm(queries, axis=1, keepdims=True)
    bn = np.linalg.norm(base, axis=1, keepdims=True)
    sims = queries @ base.T
    denom = qn @ bn.T
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, sims / np.where(denom > 0, denom, 1.0), 0.0)
    return 1.0 - sims


def _k_nearest(dist_row: np.ndarray, k: int, exclude: Optional[int] = None
               ) -> np.ndarray:
    """Indices of the k nearest entries; ties broken by lower index."""
    n = dist_row.shape[0]
    row = dist_row.copy()
    if exclude is not None:
        row[exclude] = np.inf
    order = np.lexsort((np.arange(n), row))
    return order[:k]


class MlKnn:
    """Multi-label k-nearest-neighbours with smoothed prior/posterior counting.

    For each label, the prior is its smoothed training frequency and the
    posterior conditions on how many of the k nearest neighbours carry the
    label; a label is predicted iff the "present" hypothesis strictly
    outweighs the "absent" one. Cosine distance, neighbour ties broken by
    example index. The training-phase neighbour statistics use the same
    search as queries do, so a training example counts itself among its
    own neighbours.
    """

    def __init__(self, k: int = 10, smooth: float = 1.0):
        if smooth <= 0:
            raise ValueError("smooth must be positive")
        self.k = k
        self.smooth = smooth

    def fit(self, x: np.ndarray, label_sets: Sequence[set[int]],
            num_labels: int) -> "MlKnn":
        n = x.shape[0]
        if n == 0:
            raise ValueError("ML-KNN needs a nonempty training set")
        if not 1 <= self.k <= n:
            raise ValueError(f"k={self.k} outside [1, {n}]")
        self.x = x
        self.y = np.zeros((n, num_labels))
        for i, labels in enumerate(label_sets):
            for lab in labels:
                self.y[i, lab] = 1.0
        s, k = self.smooth, self.k
        counts = self.y.sum(axis=0)
        self.prior1 = (s + counts) / (2 * s + n)
        self.prior0 = 1.0 - self.prior1

        dist = _cosine_distances(x, x)
        c1 = np.zeros((num_labels, k + 1))
        c0 = np.zeros((num_labels, k + 1))
        for i in range(n):
            neigh = _k_nearest(dist[i], k)
            deltas = self.y[neigh].sum(axis=0).astype(int)
            for j in range(num_labels):
                if self.y[i, j] == 1.0:
                    c1[j, deltas[j]] += 1
                else:
                    c0[j, deltas[j]] += 1
        self.cond1 = (s + c1) / (s * (k + 1) + c1.sum(axis=1, keepdims=True))
        self.cond0 = (s + c0) / (s * (k + 1) + c0.sum(axis=1, keepdims=True))
        return self

    def predict(self, query: np.ndarray) -> set[int]:
        dist = _cosine_distances(query.reshape(1, -1), self.x)[0]
        neigh = _k_nearest(dist, self.k)
        deltas = self.y[neigh].sum(axis=0).astype(int)
        picked = set()
        for j in range(self.y.shape[1]):
            p1 = self.prior1[j] * self.cond1[j, deltas[j]]
            p0 = self.prior0[j] * self.cond0[j, deltas[j]]
            if p1 > p0:
                picked.add(j)
        return picked


def mlknn(train_x: np.ndarray, train_labels: Sequence[set[int]],
          query: np.ndarray, k: int = 10, smooth: float = 1.0,
          num_labels: Optional[int] = None) -> set[int]:
    """One-shot fit+query convenience wrapper."""
    if num_labels is None:
        num_labels = max((max(s) for s in train_labels if s), default=0) + 1
    return MlKnn(k=k, smooth=smooth).fit(train_x, train_labels, num_labels) \
                                    .predict(query)


# ---------------------------------------------------------------------------
# Logistic / softmax regression through the tensor core
# ---------------------------------------------------------------------------

def _fit_logistic(x: np.ndarray, y: np.ndarray, epochs: int = 200,
                  lr: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Full-batch multi-output logistic regression; the per-column losses
    are independent, so this is exactly one binary classifier per column."""
    n, f = x.shape
    cols = y.shape[1]
    params = ParamSet()
    w = params.add("w", zeros_param((f, cols)))
    b = params.add("b", zeros_param((cols,)))
    state = AdamState(params, alpha=lr)
    xc = constant(x)
    yc = constant(y)
    one_minus_y = constant(1.0 - y)
    scale = constant(-1.0 / (n * cols))
    for _ in range(epochs):
        with Tape() as tape:
            p = sigmoid(add(matmul(xc, w), b))
            pos = mul(yc, log(p, floor=_LOG_FLOOR))
            neg = mul(one_minus_y, log(add(mul(p, constant(-1.0)), constant(1.0)),
                                       floor=_LOG_FLOOR))
            loss = mul(tsum(add(pos, neg)), scale)
            tape.backward(loss)
        adam_step(params, state)
    return w.data.copy(), b.data.copy()


def _fit_softmax(x: np.ndarray, class_ids: np.ndarray, num_classes: int,
                 epochs: int = 200, lr: float = 0.01
                 ) -> tuple[np.ndarray, np.ndarray]:
    n, f = x.shape
    params = ParamSet()
    w = params.add("w", zeros_param((f, num_classes)))
    b = params.add("b", zeros_param((num_classes,)))
    state = AdamState(params, alpha=lr)
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), class_ids] = 1.0
    xc = constant(x)
    yc = constant(onehot)
    scale = constant(-1.0 / n)
    for _ in range(epochs):
        with Tape() as tape:
            p = softmax(add(matmul(xc, w), b))
            loss = mul(tsum(mul(yc, log(p, floor=_LOG_FLOOR))), scale)
            tape.backward(loss)
        adam_step(params, state)
    return w.data.copy(), b.data.copy()


# ---------------------------------------------------------------------------
# Binary relevance
# ---------------------------------------------------------------------------

class BinaryRelevance:
    """One independent logistic classifier per label; predict iff p > 0.5."""

    def __init__(self, epochs: int = 200, lr: float = 0.01):
        self.epochs = epochs
        self.lr = lr

    def fit(self, x: np.ndarray, label_sets: Sequence[set[int]],
            label_ids: Sequence[int]) -> "BinaryRelevance":
        self.label_ids = list(label_ids)
        n = x.shape[0]
        y = np.zeros((n, len(self.label_ids)))
        for i, labels in enumerate(label_sets):
            for j, lab in enumerate(self.label_ids):
                if lab in labels:
                    y[i, j] = 1.0
        self.never_positive = y.sum(axis=0) == 0
        for j in np.flatnonzero(self.never_positive):
            logger.warning("label id %d has no positive training examples; "
                           "its classifier always predicts negative",
                           self.label_ids[j])
        self.w, self.b = _fit_logistic(x, y, epochs=self.epochs, lr=self.lr)
        return self

    def decision(self, query: np.ndarray) -> np.ndarray:
        z = query @ self.w + self.b
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))

    def predict(self, query: np.ndarray) -> set[int]:
        probs = self.decision(query)
        picked = set()
        for j, lab in enumerate(self.label_ids):
            if not self.never_positive[j] and probs[j] > 0.5:
                picked.add(lab)
        return picked


# ---------------------------------------------------------------------------
# Label powerset
# ---------------------------------------------------------------------------

class LabelPowerset:
    """Multiclass classifier over the unique label combinations seen in
    training; an unseen combination is unreachable by construction."""

    def __init__(self, epochs: int = 200, lr: float = 0.01):
        self.epochs = epochs
        self.lr = lr

    def fit(self, x: np.ndarray, label_sets: Sequence[set[int]]) -> "LabelPowerset":
        combos = sorted({tuple(sorted(s)) for s in label_sets})
        self.classes = combos
        index = {c: i for i, c in enumerate(combos)}
        class_ids = np.array([index[tuple(sorted(s))] for s in label_sets])
        self.w, self.b = _fit_softmax(x, class_ids, len(combos),
                                      epochs=self.epochs, lr=self.lr)
        return self

    def predict(self, query: np.ndarray) -> set[int]:
        logits = query @ self.w + self.b
        return set(self.classes[int(np.argmax(logits))])


# ---------------------------------------------------------------------------
# Classifier chain
# ---------------------------------------------------------------------------

def frequency_order(label_sets: Sequence[set[int]],
                    label_ids: Sequence[int]) -> list[int]:
    """Descending training frequency, ties broken by ascending label id."""
    counts = {lab: 0 for lab in label_ids}
    for labels in label_sets:
        for lab in labels:
            if lab in counts:
                counts[lab] += 1
    return sorted(label_ids, key=lambda l: (-counts[l], l))


class ClassifierChain:
    """Binary classifiers linked in a chain: classifier j sees the features
    plus the binary values of all earlier labels in the chain (gold during
    training, own predictions at inference)."""

    def __init__(self, epochs: int = 200, lr: float = 0.01):
        self.epochs = epochs
        self.lr = lr

    def fit(self, x: np.ndarray, label_sets: Sequence[set[int]],
            order: Sequence[int]) -> "ClassifierChain":
        order = list(order)
        if len(order) != len(set(order)):
            raise ValueError("chain order must be a permutation (it repeats ids)")
        self.order = order
        n = x.shape[0]
        gold = np.zeros((n, len(order)))
        for i, labels in enumerate(label_sets):
            for j, lab in enumerate(order):
                if lab in labels:
                    gold[i, j] = 1.0
        self.weights: list[tuple[np.ndarray, np.ndarray]] = []
        for j in range(len(order)):
            xj = np.concatenate([x, gold[:, :j]], axis=1) if j else x
            w, b = _fit_logistic(xj, gold[:, j:j + 1], epochs=self.epochs,
                                 lr=self.lr)
            self.weights.append((w[:, 0], float(b[0])))
        return self

    def predict(self, query: np.ndarray) -> set[int]:
        picked = set()
        prev = np.zeros(len(self.order))
        for j, lab in enumerate(self.order):
            xj = np.concatenate([query, prev[:j]])
            w, b = self.weights[j]
            p = 1.0 / (1.0 + np.exp(-np.clip(xj @ w + b, -500, 500)))
            if p > 0.5:
                picked.add(lab)
                prev[j] = 1.0
        return picked


# ---------------------------------------------------------------------------
# RNN-MLLR trainer
# ---------------------------------------------------------------------------

def train_rnn_mllr(train: Sequence[Example], dev: Sequence[Example],
                   hyper: HyperParams, num_chars: int, num_labels: int,
                   resources: int, seed: int, log_fn=None
                   ) -> tuple[ParamSet, list[dict]]:
    """Train the shared encoder with a per-label sigmoid head.

    Per-label binary cross entropy, Adam, parameters taken from the epoch
    with the highest dev micro-F1.
    """
    rng = np.random.default_rng(seed)
    params = build_params(hyper, num_chars, num_labels, resources, rng, kind="mllr")
    state = AdamState(params, alpha=hyper.learning_rate)
    n_labels_f = float(num_labels)

    def example_loss(ex: Example) -> Tensor:
        probs = rnn_mllr_forward(ex.descriptions, params)
        y = np.zeros((1, num_labels))
        for lab in ex.labels:
            y[0, lab] = 1.0
        pos = mul(constant(y), log(probs, floor=_LOG_FLOOR))
        neg = mul(constant(1.0 - y),
                  log(add(mul(probs, constant(-1.0)), constant(1.0)),
                      floor=_LOG_FLOOR))
        return mul(tsum(add(pos, neg)), constant(-1.0 / n_labels_f))

    def dev_f1() -> float:
        if not dev:
            return 0.0
        preds = [mllr_predict_set(rnn_mllr_forward(ex.descriptions, params).data[0])
                 for ex in dev]
        return micro_prf(preds, [set(ex.labels) for ex in dev]).f1

    history: list[dict] = []
    best = params.snapshot()
    best_f1 = -1.0
    if hyper.epochs == 0:
        logger.warning("epochs=0: returning initial parameters")
    indices = np.arange(len(train))
    for epoch in range(1, hyper.epochs + 1):
        rng.shuffle(indices)
        total_loss = 0.0
        for start in range(0, len(indices), hyper.batch_size):
            batch = indices[start:start + hyper.batch_size]
            with Tape() as tape:
                acc = None
                for i in batch:
                    term = example_loss(train[int(i)])
                    acc = term if acc is None else add(acc, term)
                batch_loss = mul(acc, constant(1.0 / len(batch)))
                if not np.isfinite(batch_loss.item()):
                    raise ArithmeticError(
                        f"non-finite loss in epoch {epoch}, batch at {start}: "
                        f"{[train[int(i)].word for i in batch]}")
                tape.backward(batch_loss)
            adam_step(params, state)
            total_loss += batch_loss.item() * len(batch)
        f1 = dev_f1()
        row = {"epoch": epoch, "train_loss": round(total_loss / len(train), 6),
               "dev_f1": round(f1, 4)}
        history.append(row)
        if log_fn:
            log_fn(row)
        if f1 > best_f1:
            best_f1 = f1
            best = params.snapshot()
    params.restore(best)
    return params, history


def mllr_predictor(params: ParamSet):
    """Closure mapping an Example to its predicted label-id set."""
    def predict_fn(ex: Example) -> set[int]:
        return mllr_predict_set(rnn_mllr_forward(ex.descriptions, params).data[0])
    return predict_fn
