"""Gradient-check suite: every primitive op, both loss modes, the
per-label BCE head, and the full soft-loss model on a two-example batch."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .data.corpus import EOS_ID
from .loss import label_bag, sequence_loss
from .model import HyperParams, build_params, rnn_mllr_forward
from .ndcore import (
    ParamSet,
    Tensor,
    add,
    attention_weights,
    concat,
    constant,
    embedding_lookup,
    grad_check,
    gru_sequence,
    log,
    matmul,
    mul,
    sigmoid,
    sigmoid_linear,
    slice_axis,
    softmax,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .training import example_loss
from .data.corpus import Example


def _param(rng, shape) -> Tensor:
    return Tensor(rng.uniform(-0.9, 0.9, size=shape), requires_grad=True)


def _weighted_sum(t, rng_const) -> Tensor:
    return tsum(mul(t, constant(rng_const)))


def primitive_checks(seed: int = 0, epsilon: float = 1e-5
                     ) -> list[tuple[str, Callable, ParamSet]]:
    """(name, loss function, params) triple per primitive op."""
    rng = np.random.default_rng(seed)
    checks = []

    def make(name, builder):
        params, fn = builder()
        checks.append((name, fn, params))

    def matmul_case():
        params = ParamSet()
        a = params.add("a", _param(rng, (3, 4)))
        b = params.add("b", _param(rng, (4, 2)))
        c = rng.uniform(-1, 1, (3, 2))
        return params, lambda p: _weighted_sum(matmul(p["a"], p["b"]), c)
    make("matmul", matmul_case)

    def add_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        params.add("b", _param(rng, (1, 4)))  # exercises broadcast
        c = rng.uniform(-1, 1, (3, 4))
        return params, lambda p: _weighted_sum(add(p["a"], p["b"]), c)
    make("add", add_case)

    def mul_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        params.add("b", _param(rng, (1, 4)))
        c = rng.uniform(-1, 1, (3, 4))
        return params, lambda p: _weighted_sum(mul(p["a"], p["b"]), c)
    make("mul", mul_case)

    def concat_case():
        params = ParamSet()
        params.add("a", _param(rng, (2, 3)))
        params.add("b", _param(rng, (2, 2)))
        c = rng.uniform(-1, 1, (2, 5))
        return params, lambda p: _weighted_sum(concat([p["a"], p["b"]], axis=1), c)
    make("concat", concat_case)

    def slice_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 5)))
        c = rng.uniform(-1, 1, (3, 2))
        return params, lambda p: _weighted_sum(slice_axis(p["a"], 1, 1, 3), c)
    make("slice", slice_case)

    def transpose_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        c = rng.uniform(-1, 1, (4, 3))
        return params, lambda p: _weighted_sum(transpose(p["a"]), c)
    make("transpose", transpose_case)

    def tanh_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        c = rng.uniform(-1, 1, (3, 4))
        return params, lambda p: _weighted_sum(tanh(p["a"]), c)
    make("tanh", tanh_case)

    def sigmoid_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        c = rng.uniform(-1, 1, (3, 4))
        return params, lambda p: _weighted_sum(sigmoid(p["a"]), c)
    make("sigmoid", sigmoid_case)

    def softmax_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 5)))
        c = rng.uniform(-1, 1, (3, 5))
        return params, lambda p: _weighted_sum(softmax(p["a"]), c)
    make("softmax", softmax_case)

    def log_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        c = rng.uniform(-1, 1, (3, 4))
        return params, lambda p: _weighted_sum(log(sigmoid(p["a"]), floor=1e-12), c)
    make("log", log_case)

    def sum_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        c = rng.uniform(-1, 1, (4,))
        return params, lambda p: tsum(mul(tsum(p["a"], axis=0), constant(c)))
    make("sum", sum_case)

    def mean_case():
        params = ParamSet()
        params.add("a", _param(rng, (3, 4)))
        c = rng.uniform(-1, 1, (3,))
        return params, lambda p: tsum(mul(tmean(p["a"], axis=1), constant(c)))
    make("mean", mean_case)

    def embedding_case():
        params = ParamSet()
        params.add("table", _param(rng, (6, 4)))
        ids = [0, 2, 2, 5, 1]  # repeated id exercises scatter-add
        c = rng.uniform(-1, 1, (5, 4))
        return params, lambda p: _weighted_sum(embedding_lookup(p["table"], ids), c)
    make("embedding", embedding_case)

    def gru_case(reverse):
        def build():
            params = ParamSet()
            params.add("x", _param(rng, (5, 3)))
            params.add("h0", _param(rng, (1, 4)))
            params.add("w_zr", _param(rng, (7, 8)))
            params.add("b_zr", _param(rng, (8,)))
            params.add("w_c", _param(rng, (7, 4)))
            params.add("b_c", _param(rng, (4,)))
            c = rng.uniform(-1, 1, (5, 4))
            return params, lambda p: _weighted_sum(
                gru_sequence(p["x"], p["h0"], p["w_zr"], p["b_zr"],
                             p["w_c"], p["b_c"], reverse=reverse), c)
        return build
    make("gru_sequence", gru_case(False))
    make("gru_sequence_reverse", gru_case(True))

    def attention_case():
        params = ParamSet()
        params.add("q", _param(rng, (1, 4)))
        params.add("keys", _param(rng, (6, 5)))
        params.add("w_a", _param(rng, (4, 5)))
        params.add("v_a", _param(rng, (5, 1)))
        c = rng.uniform(-1, 1, (1, 6))
        return params, lambda p: _weighted_sum(
            attention_weights(p["q"], p["keys"], p["w_a"], p["v_a"]), c)
    make("attention", attention_case)

    def sigmoid_linear_case():
        params = ParamSet()
        params.add("cond", _param(rng, (2, 5)))
        params.add("w", _param(rng, (5, 3)))
        params.add("b", _param(rng, (3,)))
        c = rng.uniform(-1, 1, (2, 3))
        return params, lambda p: _weighted_sum(
            sigmoid_linear(p["cond"], p["w"], p["b"]), c)
    make("sigmoid_linear", sigmoid_linear_case)

    return checks


def loss_checks(seed: int = 0) -> list[tuple[str, Callable, ParamSet]]:
    """Soft and hard sequence losses differentiated through softmax logits."""
    rng = np.random.default_rng(seed)
    vocab = 7  # 3 reserved + 4 labels
    gold = [3, 5]
    bag = label_bag(gold, vocab)
    gold_seq = gold + [EOS_ID]
    checks = []
    for mode in ("soft", "hard"):
        params = ParamSet()
        for t in range(len(gold_seq)):
            params.add(f"z{t}", _param(rng, (1, vocab)))

        def fn(p, mode=mode):
            probs = [softmax(p[f"z{t}"]) for t in range(len(gold_seq))]
            return sequence_loss(probs, gold_seq, bag, mode=mode)
        checks.append((f"sequence_loss[{mode}]", fn, params))
    return checks


def _micro_examples() -> list[Example]:
    return [
        Example("w0", [[1, 2, 3, 4], [5, 6]], [3, 4]),
        Example("w1", [[2, 2, 7], []], [5]),  # one empty resource
    ]


def _micro_hyper() -> HyperParams:
    return HyperParams(char_embed_dim=5, label_embed_dim=4, hidden_dim=6,
                       batch_size=2, epochs=1, l_max=8, learning_rate=1e-3)


def full_model_check(seed: int = 0) -> tuple[str, Callable, ParamSet]:
    """Soft loss of the full attention model on a 2-example batch."""
    rng = np.random.default_rng(seed)
    hyper = _micro_hyper()
    num_chars, num_labels = 9, 8
    params = build_params(hyper, num_chars, num_labels, 2, rng, kind="seq2seq")
    examples = _micro_examples()

    def fn(p):
        acc = None
        for ex in examples:
            term = example_loss(p, ex, num_labels, mode="soft")
            acc = term if acc is None else add(acc, term)
        return mul(acc, constant(0.5))
    return "ld_seq2seq_full_loss", fn, params


def mllr_check(seed: int = 0) -> tuple[str, Callable, ParamSet]:
    """Per-label binary cross entropy through the encoder+sigmoid head.

    The zero-initialized head is nudged off zero so the check is not run
    at a symmetric point.
    """
    rng = np.random.default_rng(seed)
    hyper = _micro_hyper()
    num_chars, num_labels = 9, 8
    params = build_params(hyper, num_chars, num_labels, 2, rng, kind="mllr")
    params["mllr.w"].data = rng.uniform(-0.5, 0.5, params["mllr.w"].shape)
    params["mllr.b"].data = rng.uniform(-0.5, 0.5, params["mllr.b"].shape)
    examples = _micro_examples()

    def fn(p):
        acc = None
        for ex in examples:
            probs = rnn_mllr_forward(ex.descriptions, p)
            y = np.zeros((1, num_labels))
            for lab in ex.labels:
                y[0, lab] = 1.0
            pos = mul(constant(y), log(probs, floor=1e-12))
            neg = mul(constant(1.0 - y),
                      log(add(mul(probs, constant(-1.0)), constant(1.0)),
                          floor=1e-12))
            term = mul(tsum(add(pos, neg)), constant(-1.0 / num_labels))
            acc = term if acc is None else add(acc, term)
        return mul(acc, constant(0.5))
    return "rnn_mllr_bce", fn, params


def run_all(seed: int = 0, epsilon: float = 1e-5,
            max_coords_per_param: int = 8) -> list[tuple[str, float]]:
    """Run every check; returns (name, max relative error) pairs."""
    suite = primitive_checks(seed, epsilon) + loss_checks(seed)
    suite.append(full_model_check(seed))
    suite.append(mllr_check(seed))
    results = []
    for name, fn, params in suite:
        err = grad_check(fn, params, epsilon=epsilon,
                         max_coords_per_param=max_coords_per_param, seed=seed)
        results.append((name, err))
    return results
