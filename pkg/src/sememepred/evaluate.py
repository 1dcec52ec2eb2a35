"""Micro-averaged precision/recall/F1, exact-match accuracy, and the
multi-model comparison report."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    exact_match: float


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def micro_prf(predictions: Sequence[Iterable], golds: Sequence[Iterable]) -> Metrics:
    """Pool true/false positive/negative counts over all examples.

    Predictions and golds are compared as sets; counts use exact rational
    arithmetic and the zero-denominator convention P = R = F1 = 0.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions vs {len(golds)} golds")
    tp = fp = fn = 0
    exact = 0
    for pred, gold in zip(predictions, golds):
        pred, gold = set(pred), set(gold)
        if not gold:
            raise ValueError("gold label sets must be nonempty")
        tp += len(pred & gold)
        fp += len(pred - gold)
        fn += len(gold - pred)
        exact += pred == gold
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f1 = 2 * p * r / (p + r) if p + r > 0 else Fraction(0)
    acc = _ratio(exact, len(golds)) if golds else Fraction(0)
    return Metrics(tp=tp, fp=fp, fn=fn, precision=float(p), recall=float(r),
                   f1=float(f1), exact_match=float(acc))


def exact_match_accuracy(predictions: Sequence[Iterable],
                         golds: Sequence[Iterable]) -> float:
    """Fraction of examples whose predicted set equals the gold set exactly."""
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        return 0.0
    hits = sum(set(p) == set(g) for p, g in zip(predictions, golds))
    return hits / len(golds)


def compare(models: Sequence[tuple[str, Callable]], examples: Sequence,
            golds: Sequence[Iterable], split: str = "test", seed: int = 0,
            config_hash: str = "") -> list[dict]:
    """Run each named predictor over the same frozen examples.

    Each predictor maps one example to an iterable of label ids. A failing
    model gets a row with an error message; the run continues. Rows keep
    the caller's model order (table order is the caller's concern).
    """
    rows: list[dict] = []
    for name, predict_fn in models:
        row: dict = {"model": name, "split": split, "seed": seed,
                     "config_hash": config_hash}
        try:
            preds = [set(predict_fn(ex)) for ex in examples]
            m = micro_prf(preds, golds)
            row.update(precision=round(m.precision, 4), recall=round(m.recall, 4),
                       f1=round(m.f1, 4), accuracy=round(m.exact_match, 4),
                       tp=m.tp, fp=m.fp, fn=m.fn)
        except Exception as exc:  # a broken model must not sink the report
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def format_table(rows: Sequence[dict]) -> str:
    """Aligned plain-text table over the comparison rows."""
    header = ("model", "P", "R", "F1", "acc")
    width = max([len(header[0])] + [len(r["model"]) for r in rows]) + 2
    lines = [f"{header[0]:<{width}}{'P':>8}{'R':>8}{'F1':>8}{'acc':>8}"]
    for r in rows:
        if "error" in r:
            lines.append(f"{r['model']:<{width}}  FAILED: {r['error']}")
        else:
            lines.append(f"{r['model']:<{width}}{r['precision']:>8.4f}"
                         f"{r['recall']:>8.4f}{r['f1']:>8.4f}{r['accuracy']:>8.4f}")
    return "\n".join(lines)


def write_report(rows: Sequence[dict], path: str) -> None:
    """Machine-readable report: one JSON record per row, keys sorted so the
    bytes are reproducible."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
