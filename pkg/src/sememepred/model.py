"""Neural architecture: BiGRU encoders, gated multi-resource fusion,
attention decoder, greedy prediction, and the encoder+logistic-regression
head used by the RNN-MLLR baseline.

Shapes: every per-direction GRU state is (1, H); per-position encoder
states are [forward ; backward] of width 2H; the fused description vector
and per-step contexts are (1, 2H); the decoder hidden state is (1, H).

Attention scores use the *previous* decoder state (the recurrence needs
the context before the new state exists), and the decoder GRU treats
[context ; previous-label-embedding] as its input and the previous state
as its hidden state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data.corpus import EOS_ID, PAD_ID, UNK_ID
from .ndcore import (
    ParamSet,
    Tensor,
    add,
    attention_weights,
    concat,
    constant,
    embedding_lookup,
    gru_sequence,
    matmul,
    mul,
    sigmoid_linear,
    slice_axis,
    softmax,
    tanh,
    uniform_param,
    zeros_param,
)

logger = logging.getLogger(__name__)


@dataclass
class HyperParams:
    char_embed_dim: int = 32
    label_embed_dim: int = 32
    hidden_dim: int = 64
    batch_size: int = 16
    epochs: int = 15
    l_max: int = 8
    learning_rate: float = 1e-3
    seed: int = 0

    def validate(self) -> None:
        for name in ("char_embed_dim", "label_embed_dim", "hidden_dim",
                     "batch_size", "l_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


# Paper-scale settings and a small configuration for fast desk runs.
PRESETS = {
    "paper": HyperParams(char_embed_dim=200, label_embed_dim=200, hidden_dim=300,
                         batch_size=20, epochs=10, learning_rate=1e-3),
    "desk": HyperParams(char_embed_dim=32, label_embed_dim=32, hidden_dim=64,
                        batch_size=16, epochs=15, learning_rate=0.01),
}


@dataclass
class EncoderOutput:
    """Per-resource hidden state stacks plus the fused description vector."""
    hidden: list[Optional[Tensor]]       # (l_r, 2H) or None for empty resources
    summaries: list[Tensor]              # (1, 2H) each; zeros for empty
    summary: Tensor                      # fused v_d, (1, 2H)
    gates: Optional[list[Tensor]]        # summary gates, None when R == 1
    att_keys: list[Optional[Tensor]]     # precomputed U_a @ h_i per resource


@dataclass
class DecoderState:
    s: Tensor          # (1, H)
    t: int
    e_prev: Tensor     # (1, E_label)


@dataclass
class Prediction:
    """Greedy decode result: emitted label ids plus per-step distributions."""
    label_ids: list[int]
    step_probs: list[np.ndarray]


def build_params(hyper: HyperParams, num_chars: int, num_labels: int,
                 resource_count: int, rng: np.random.Generator,
                 kind: str = "seq2seq",
                 label_embed_init: Optional[np.ndarray] = None) -> ParamSet:
    """Create all learnable tensors for one model.

    kind is "seq2seq" (attention decoder) or "mllr" (per-label sigmoid head
    on the fused description vector; head weights start at zero).
    """
    if kind not in ("seq2seq", "mllr"):
        raise ValueError(f"unknown model kind {kind!r}")
    if resource_count < 1:
        raise ValueError("resource_count must be >= 1")
    e_c, e_l, h = hyper.char_embed_dim, hyper.label_embed_dim, hyper.hidden_dim
    params = ParamSet()
    params.add("char_embed", uniform_param((num_chars, e_c), rng))
    for r in range(resource_count):
        for direction in ("fw", "bw"):
            params.add(f"enc{r}.{direction}.w_zr", uniform_param((e_c + h, 2 * h), rng))
            params.add(f"enc{r}.{direction}.b_zr", uniform_param((2 * h,), rng))
            params.add(f"enc{r}.{direction}.w_c", uniform_param((e_c + h, h), rng))
            params.add(f"enc{r}.{direction}.b_c", uniform_param((h,), rng))
    if resource_count > 1:
        for r in range(resource_count):
            params.add(f"gate_sum.w{r}", uniform_param((2 * h * resource_count, 2 * h), rng))
            params.add(f"gate_sum.b{r}", uniform_param((2 * h,), rng))
    if kind == "mllr":
        params.add("mllr.w", zeros_param((2 * h, num_labels)))
        params.add("mllr.b", zeros_param((num_labels,)))
        return params

    for r in range(resource_count):
        params.add(f"att{r}.w_a", uniform_param((h, h), rng))
        params.add(f"att{r}.u_a", uniform_param((2 * h, h), rng))
        params.add(f"att{r}.v_a", uniform_param((h, 1), rng))
    if resource_count > 1:
        for r in range(resource_count):
            params.add(f"gate_ctx.w{r}", uniform_param((2 * h * resource_count, 2 * h), rng))
            params.add(f"gate_ctx.b{r}", uniform_param((2 * h,), rng))
    params.add("dec.w_init", uniform_param((2 * h, h), rng))
    params.add("dec.b_init", uniform_param((h,), rng))
    if label_embed_init is not None:
        if label_embed_init.shape != (num_labels, e_l):
            raise ValueError(f"label embedding init has shape "
                             f"{label_embed_init.shape}, expected {(num_labels, e_l)}")
        params.add("label_embed", Tensor(label_embed_init.copy(), requires_grad=True))
    else:
        params.add("label_embed", uniform_param((num_labels, e_l), rng))
    params.add("dec.start_embed", uniform_param((1, e_l), rng))
    dec_in = 2 * h + e_l
    params.add("dec.gru.w_zr", uniform_param((dec_in + h, 2 * h), rng))
    params.add("dec.gru.b_zr", uniform_param((2 * h,), rng))
    params.add("dec.gru.w_c", uniform_param((dec_in + h, h), rng))
    params.add("dec.gru.b_c", uniform_param((h,), rng))
    params.add("out.w", uniform_param((h, num_labels), rng))
    params.add("out.b", uniform_param((num_labels,), rng))
    return params


def hidden_dim(params: ParamSet) -> int:
    return params["enc0.fw.w_c"].shape[1]


def resource_count(params: ParamSet) -> int:
    r = 0
    while f"enc{r}.fw.w_zr" in params:
        r += 1
    return r


def encode_resource(token_ids: Sequence[int], params: ParamSet,
                    r: int = 0) -> tuple[Tensor, Tensor]:
    """Bidirectional GRU over one description.

    Returns the per-position states [fw_i ; bw_i] of shape (l, 2H) and the
    final vector [fw_l ; bw_1] (the last state of each direction), (1, 2H).
    """
    if not token_ids:
        raise ValueError("encode_resource needs a nonempty token sequence; "
                         "empty resources are handled by encode_multi")
    h = hidden_dim(params)
    emb = embedding_lookup(params["char_embed"], token_ids)
    h0 = constant(np.zeros((1, h)))
    fw = gru_sequence(emb, h0, params[f"enc{r}.fw.w_zr"], params[f"enc{r}.fw.b_zr"],
                      params[f"enc{r}.fw.w_c"], params[f"enc{r}.fw.b_c"])
    bw = gru_sequence(emb, h0, params[f"enc{r}.bw.w_zr"], params[f"enc{r}.bw.b_zr"],
                      params[f"enc{r}.bw.w_c"], params[f"enc{r}.bw.b_c"], reverse=True)
    states = concat([fw, bw], axis=1)
    l = len(token_ids)
    final = concat([slice_axis(fw, 0, l - 1, l), slice_axis(bw, 0, 0, 1)], axis=1)
    return states, final


def encode_multi(resources: Sequence[Sequence[int]], params: ParamSet) -> EncoderOutput:
    """Encode every resource and fuse the summaries.

    With one resource the summary is used directly; with several, each
    resource gets a sigmoid gate conditioned on the concatenation of all
    summaries and the fused vector is the gated sum. Empty resources
    contribute zero summaries and no hidden states.
    """
    n_res = resource_count(params)
    if len(resources) != n_res:
        raise ValueError(f"model expects {n_res} resources, got {len(resources)}")
    if not any(len(d) for d in resources):
        raise ValueError("all resources are empty")
    h = hidden_dim(params)

    hidden: list[Optional[Tensor]] = []
    summaries: list[Tensor] = []
    for r, tokens in enumerate(resources):
        if len(tokens):
            states, final = encode_resource(tokens, params, r)
            hidden.append(states)
            summaries.append(final)
        else:
            hidden.append(None)
            summaries.append(constant(np.zeros((1, 2 * h))))

    gates: Optional[list[Tensor]] = None
    if n_res == 1:
        summary = summaries[0]
    else:
        all_v = concat(summaries, axis=1)
        gates = []
        summary = None
        for r in range(n_res):
            g = sigmoid_linear(all_v, params[f"gate_sum.w{r}"],
                               params[f"gate_sum.b{r}"])
            gates.append(g)
            contrib = mul(g, summaries[r])
            summary = contrib if summary is None else add(summary, contrib)

    att_keys: list[Optional[Tensor]] = []
    for r in range(n_res):
        if hidden[r] is not None and f"att{r}.u_a" in params:
            att_keys.append(matmul(hidden[r], params[f"att{r}.u_a"]))
        else:
            att_keys.append(None)
    return EncoderOutput(hidden=hidden, summaries=summaries, summary=summary,
                         gates=gates, att_keys=att_keys)


def init_decoder_state(enc: EncoderOutput, params: ParamSet) -> DecoderState:
    s0 = tanh(add(matmul(enc.summary, params["dec.w_init"]), params["dec.b_init"]))
    return DecoderState(s=s0, t=0, e_prev=params["dec.start_embed"])


def decode_step(state: DecoderState, enc: EncoderOutput, params: ParamSet
                ) -> tuple[DecoderState, Tensor, list[Optional[Tensor]]]:
    """One decoding step.

    Computes additive-attention contexts per resource against the previous
    decoder state, gate-fuses them, advances the GRU on [context ;
    previous-label-embedding], and returns the new state, the label
    distribution, and the per-resource attention weights (None for empty
    resources, whose context is zero).
    """
    n_res = len(enc.hidden)
    h = hidden_dim(params)
    contexts: list[Tensor] = []
    alphas: list[Optional[Tensor]] = []
    for r in range(n_res):
        if enc.hidden[r] is None:
            contexts.append(constant(np.zeros((1, 2 * h))))
            alphas.append(None)
            continue
        alpha = attention_weights(state.s, enc.att_keys[r],
                                  params[f"att{r}.w_a"], params[f"att{r}.v_a"])
        contexts.append(matmul(alpha, enc.hidden[r]))
        alphas.append(alpha)

    if n_res == 1:
        context = contexts[0]
    else:
        all_c = concat(contexts, axis=1)
        context = None
        for r in range(n_res):
            g = sigmoid_linear(all_c, params[f"gate_ctx.w{r}"],
                               params[f"gate_ctx.b{r}"])
            contrib = mul(g, contexts[r])
            context = contrib if context is None else add(context, contrib)

    x = concat([context, state.e_prev], axis=1)
    s_new = gru_sequence(x, state.s, params["dec.gru.w_zr"], params["dec.gru.b_zr"],
                         params["dec.gru.w_c"], params["dec.gru.b_c"])
    p = softmax(add(matmul(s_new, params["out.w"]), params["out.b"]))
    return DecoderState(s=s_new, t=state.t + 1, e_prev=state.e_prev), p, alphas


def teacher_forced_probs(descriptions: Sequence[Sequence[int]], gold_seq: Sequence[int],
                         params: ParamSet, feed_own: bool = False) -> list[Tensor]:
    """Step distributions for a gold sequence (EOS last).

    Teacher forcing feeds the gold previous label; feed_own=True feeds the
    model's own argmax instead.
    """
    enc = encode_multi(descriptions, params)
    state = init_decoder_state(enc, params)
    probs: list[Tensor] = []
    for gold in gold_seq:
        state, p, _ = decode_step(state, enc, params)
        probs.append(p)
        nxt = int(np.argmax(p.data[0])) if feed_own else gold
        state.e_prev = embedding_lookup(params["label_embed"], [nxt])
    return probs


def predict(descriptions: Sequence[Sequence[int]], params: ParamSet,
            l_max: int = 8) -> Prediction:
    """Greedy decode: argmax per step (ties to the lowest id), already
    emitted labels and PAD/UNK masked, stop at EOS or after l_max labels."""
    if not params.all_finite():
        raise ArithmeticError("parameters contain NaN/Inf; refusing to predict")
    enc = encode_multi(descriptions, params)
    state = init_decoder_state(enc, params)
    emitted: list[int] = []
    step_probs: list[np.ndarray] = []
    for _ in range(l_max + 1):
        state, p, _ = decode_step(state, enc, params)
        row = p.data[0].copy()
        step_probs.append(row)
        masked = row.copy()
        masked[PAD_ID] = -1.0
        masked[UNK_ID] = -1.0
        for e in emitted:
            masked[e] = -1.0
        pick = int(np.argmax(masked))
        if pick == EOS_ID:
            if not emitted:
                logger.debug("EOS at the first step: empty label set")
            break
        emitted.append(pick)
        if len(emitted) >= l_max:
            break
        state.e_prev = embedding_lookup(params["label_embed"], [pick])
    return Prediction(label_ids=emitted, step_probs=step_probs)


def rnn_mllr_forward(descriptions: Sequence[Sequence[int]], params: ParamSet) -> Tensor:
    """Per-label independent probabilities from the shared encoder: a
    sigmoid on a linear map of the fused description vector, shape (1, V)."""
    enc = encode_multi(descriptions, params)
    return sigmoid_linear(enc.summary, params["mllr.w"], params["mllr.b"])


def mllr_predict_set(probs: np.ndarray, threshold: float = 0.5) -> set[int]:
    """Labels with probability strictly above the threshold (reserved ids
    can never be predicted)."""
    picks = set()
    for i, p in enumerate(probs):
        if i in (PAD_ID, UNK_ID, EOS_ID):
            continue
        if p > threshold:
            picks.add(i)
    return picks
