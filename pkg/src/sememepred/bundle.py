"""Uniform save/load for trained models.

Every model kind serializes its arrays through the ndcore checkpoint
format; everything non-numeric (vocabularies, hyperparameters, feature
space, chain order, ...) lives in a `<prefix>.meta.json` sidecar written
with sorted keys so identical runs produce identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import baselines as bl
from .data.corpus import Example, Vocab
from .loss import LOG_FLOOR
from .model import HyperParams, mllr_predict_set, predict, rnn_mllr_forward
from .ndcore import ParamSet, Tensor, load_checkpoint, save_checkpoint

SEQ2SEQ_KINDS = ("ld-seq2seq", "basic-seq2seq")
NEURAL_KINDS = SEQ2SEQ_KINDS + ("rnn-mllr",)
CLASSICAL_KINDS = ("mlknn", "br", "lp", "cc")
ALL_KINDS = NEURAL_KINDS + CLASSICAL_KINDS


def meta_path(prefix: str) -> str:
    return prefix + ".meta.json"


def _vocab_to_list(vocab: Vocab) -> list[str]:
    return list(vocab.id_to_token)


def _vocab_from_list(tokens: list[str]) -> Vocab:
    vocab = Vocab()
    for tok in tokens[3:]:
        vocab.add(tok)
    return vocab


@dataclass
class ModelBundle:
    kind: str
    params: ParamSet
    meta: dict
    char_vocab: Vocab
    label_vocab: Vocab

    @property
    def resources(self) -> list[int]:
        return list(self.meta["resources"])

    @property
    def l_max(self) -> int:
        return int(self.meta.get("l_max", 8))

    def map_descriptions(self, ex: Example,
                         allowed: Optional[list[int]] = None) -> list[list[int]]:
        """Project corpus resource columns onto the model's inputs; columns
        outside `allowed` (eval-time restriction) become empty."""
        descs = []
        for col in self.resources:
            d = ex.descriptions[col] if col < len(ex.descriptions) else []
            if allowed is not None and col not in allowed:
                d = []
            descs.append(list(d))
        return descs

    def predictor(self, allowed_resources: Optional[list[int]] = None
                  ) -> Callable[[Example], set[int]]:
        kind = self.kind
        if kind in SEQ2SEQ_KINDS:
            l_max = self.l_max

            def fn(ex: Example) -> set[int]:
                descs = self.map_descriptions(ex, allowed_resources)
                return set(predict(descs, self.params, l_max=l_max).label_ids)
            return fn
        if kind == "rnn-mllr":
            def fn(ex: Example) -> set[int]:
                descs = self.map_descriptions(ex, allowed_resources)
                return mllr_predict_set(rnn_mllr_forward(descs, self.params).data[0])
            return fn
        if kind in CLASSICAL_KINDS:
            space = self._feature_space()
            clf = self._classical_model()

            def fn(ex: Example) -> set[int]:
                vec = bl.featurize(ex, space)
                return clf.predict(vec)
            return fn
        raise ValueError(f"unknown model kind {kind!r}")

    def _feature_space(self) -> bl.FeatureSpace:
        space = bl.FeatureSpace()
        for key in self.meta["feature_space"]:
            space.index[tuple(key)] = len(space.index)
        return space

    def _classical_model(self):
        kind = self.kind
        if kind == "mlknn":
            clf = bl.MlKnn(k=int(self.meta["k"]), smooth=float(self.meta["smooth"]))
            clf.x = self.params["x"].data
            clf.y = self.params["y"].data
            clf.prior1 = self.params["prior1"].data
            clf.prior0 = 1.0 - clf.prior1
            clf.cond1 = self.params["cond1"].data
            clf.cond0 = self.params["cond0"].data
            return clf
        if kind == "br":
            clf = bl.BinaryRelevance()
            clf.label_ids = [int(i) for i in self.meta["label_ids"]]
            clf.w = self.params["w"].data
            clf.b = self.params["b"].data
            clf.never_positive = self.params["never_positive"].data > 0.5
            return clf
        if kind == "lp":
            clf = bl.LabelPowerset()
            clf.classes = [tuple(int(i) for i in c) for c in self.meta["classes"]]
            clf.w = self.params["w"].data
            clf.b = self.params["b"].data
            return clf
        if kind == "cc":
            clf = bl.ClassifierChain()
            clf.order = [int(i) for i in self.meta["order"]]
            clf.weights = []
            for j in range(len(clf.order)):
                w = self.params[f"cc.w.{j}"].data
                b = float(self.params[f"cc.b.{j}"].data[0])
                clf.weights.append((w, b))
            return clf
        raise ValueError(f"{kind!r} is not a classical kind")


def save_model(prefix: str, kind: str, params: ParamSet, char_vocab: Vocab,
               label_vocab: Vocab, hyper: HyperParams, resources: list[int],
               extra_meta: Optional[dict] = None) -> None:
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    meta = {
        "kind": kind,
        "char_vocab": _vocab_to_list(char_vocab),
        "label_vocab": _vocab_to_list(label_vocab),
        "hyper": vars(hyper),
        "resources": list(resources),
        "l_max": hyper.l_max,
        "log_clamp": LOG_FLOOR,
    }
    meta.update(extra_meta or {})
    save_checkpoint(params, prefix, metadata={"kind": kind})
    with open(meta_path(prefix), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_model(prefix: str) -> ModelBundle:
    params, _ = load_checkpoint(prefix)
    with open(meta_path(prefix), encoding="utf-8") as fh:
        meta = json.load(fh)
    return ModelBundle(
        kind=meta["kind"],
        params=params,
        meta=meta,
        char_vocab=_vocab_from_list(meta["char_vocab"]),
        label_vocab=_vocab_from_list(meta["label_vocab"]),
    )


def classical_params(kind: str, clf) -> tuple[ParamSet, dict]:
    """Pack a fitted classical model's arrays and sidecar fields."""
    params = ParamSet()
    extra: dict = {}
    if kind == "mlknn":
        params.add("x", Tensor(clf.x))
        params.add("y", Tensor(clf.y))
        params.add("prior1", Tensor(clf.prior1))
        params.add("cond1", Tensor(clf.cond1))
        params.add("cond0", Tensor(clf.cond0))
        extra = {"k": clf.k, "smooth": clf.smooth}
    elif kind == "br":
        params.add("w", Tensor(clf.w))
        params.add("b", Tensor(clf.b))
        params.add("never_positive", Tensor(clf.never_positive.astype(float)))
        extra = {"label_ids": list(clf.label_ids)}
    elif kind == "lp":
        params.add("w", Tensor(clf.w))
        params.add("b", Tensor(clf.b))
        extra = {"classes": [list(c) for c in clf.classes]}
    elif kind == "cc":
        for j, (w, b) in enumerate(clf.weights):
            params.add(f"cc.w.{j}", Tensor(w))
            params.add(f"cc.b.{j}", Tensor(np.array([b])))
        extra = {"order": list(clf.order)}
    else:
        raise ValueError(f"{kind!r} is not a classical kind")
    return params, extra
