"""Micro metrics, exact match, and the comparison report."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sememepred.evaluate import (
    compare,
    exact_match_accuracy,
    format_table,
    micro_prf,
    write_report,
)


def test_hand_counted_case():
    m = micro_prf([{"a", "c"}], [{"a", "b"}])
    assert (m.tp, m.fp, m.fn) == (1, 1, 1)
    assert m.precision == 0.5
    assert m.recall == 0.5
    assert m.f1 == 0.5


def test_perfect_prediction():
    m = micro_prf([{"a"}, {"b", "c"}], [{"a"}, {"b", "c"}])
    assert m.precision == m.recall == m.f1 == 1.0
    assert m.exact_match == 1.0


def test_all_empty_predictions_zero_convention():
    m = micro_prf([set(), set()], [{"a"}, {"b"}])
    assert m.precision == 0.0
    assert m.recall == 0.0
    assert m.f1 == 0.0


def test_exact_match_cases():
    assert exact_match_accuracy([{"a", "b"}], [{"a", "b"}]) == 1.0
    assert exact_match_accuracy([{"a"}], [{"a", "b"}]) == 0.0  # partial is wrong
    preds = [{"a"}, {"b"}, {"c"}, {"d"}]
    golds = [{"a"}, {"x"}, {"y"}, {"z"}]
    assert exact_match_accuracy(preds, golds) == 0.25


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        micro_prf([{"a"}], [{"a"}, {"b"}])
    with pytest.raises(ValueError):
        exact_match_accuracy([{"a"}], [])


def test_empty_gold_rejected():
    with pytest.raises(ValueError, match="nonempty"):
        micro_prf([{"a"}], [set()])


def test_permutation_invariance():
    preds = [{"a"}, {"b", "c"}, set(), {"d"}]
    golds = [{"a", "b"}, {"b"}, {"c"}, {"d"}]
    m1 = micro_prf(preds, golds)
    order = [2, 0, 3, 1]
    m2 = micro_prf([preds[i] for i in order], [golds[i] for i in order])
    assert (m1.precision, m1.recall, m1.f1) == (m2.precision, m2.recall, m2.f1)


@settings(max_examples=200, deadline=None)
@given(st.lists(
    st.tuples(st.sets(st.integers(0, 6)), st.sets(st.integers(0, 6), min_size=1)),
    min_size=1, max_size=15))
def test_metric_bounds_and_relations(pairs):
    preds = [p for p, _ in pairs]
    golds = [g for _, g in pairs]
    m = micro_prf(preds, golds)
    for value in (m.precision, m.recall, m.f1, m.exact_match):
        assert 0.0 <= value <= 1.0
    assert m.f1 <= max(m.precision, m.recall) + 1e-12
    if m.exact_match == 1.0:
        assert m.f1 == 1.0
    assert m.exact_match == exact_match_accuracy(preds, golds)


def test_twenty_handcrafted_pairs_exact():
    # fixed bank of 20 prediction/gold pairs; totals counted by hand:
    # TP=26, FP=9, FN=12 (crosscheck: 35 predicted = TP+FP, 38 gold = TP+FN)
    pairs = [
        ({"a"}, {"a"}),                      # tp1
        ({"a", "b"}, {"a", "b"}),            # tp2
        ({"a", "b", "c"}, {"a", "b", "c"}),  # tp3
        (set(), {"a"}),                      # fn1
        ({"x"}, {"a"}),                      # fp1 fn1
        ({"a", "x"}, {"a"}),                 # tp1 fp1
        ({"a"}, {"a", "b"}),                 # tp1 fn1
        ({"a", "b"}, {"b", "c"}),            # tp1 fp1 fn1
        ({"p", "q"}, {"p", "q", "r", "s"}),  # tp2 fn2
        ({"p", "q", "r", "s"}, {"p", "q"}),  # tp2 fp2
        ({"m"}, {"n"}),                      # fp1 fn1
        ({"m", "n"}, {"m", "n"}),            # tp2
        (set(), {"z", "y"}),                 # fn2
        ({"z", "y"}, {"z", "y"}),            # tp2
        ({"u", "v", "w"}, {"u"}),            # tp1 fp2
        ({"u"}, {"u", "v", "w"}),            # tp1 fn2
        ({"k", "l"}, {"l", "k"}),            # tp2
        ({"d", "e"}, {"d", "f"}),            # tp1 fp1 fn1
        ({"g"}, {"g"}),                      # tp1
        ({"h", "i", "j"}, {"h", "i", "j"}),  # tp3
    ]
    preds = [p for p, _ in pairs]
    golds = [g for _, g in pairs]
    m = micro_prf(preds, golds)
    assert (m.tp, m.fp, m.fn) == (26, 9, 12)
    assert m.precision == pytest.approx(26 / 35)
    assert m.recall == pytest.approx(26 / 38)
    p, r = 26 / 35, 26 / 38
    assert m.f1 == pytest.approx(2 * p * r / (p + r))
    # exact matches: rows 1,2,3,12,14,17,19,20 -> 8/20
    assert m.exact_match == pytest.approx(8 / 20)


class TestCompare:
    def test_failed_model_marks_row_and_continues(self):
        def good(ex):
            return {"a"}

        def broken(ex):
            raise RuntimeError("kaput")

        rows = compare([("good", good), ("broken", broken), ("good2", good)],
                       examples=[1, 2], golds=[{"a"}, {"a"}])
        assert rows[0]["f1"] == 1.0
        assert "kaput" in rows[1]["error"]
        assert rows[2]["f1"] == 1.0

    def test_oracle_row_all_ones(self):
        golds = [{"a", "b"}, {"c"}]
        rows = compare([("oracle", lambda ex: set(ex))], golds, golds)
        assert rows[0]["precision"] == rows[0]["recall"] == rows[0]["f1"] == 1.0
        assert rows[0]["accuracy"] == 1.0

    def test_report_bytes_deterministic(self, tmp_path):
        rows = compare([("m", lambda ex: {"a"})], [1], [{"a"}],
                       seed=3, config_hash="abc")
        p1, p2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
        write_report(rows, str(p1))
        write_report(rows, str(p2))
        assert p1.read_bytes() == p2.read_bytes()
        assert b'"seed": 3' in p1.read_bytes()

    def test_format_table_alignment_and_failures(self):
        rows = [
            {"model": "good", "precision": 1.0, "recall": 0.5, "f1": 2 / 3,
             "accuracy": 0.5},
            {"model": "broken", "error": "RuntimeError: kaput"},
        ]
        text = format_table(rows)
        lines = text.splitlines()
        assert len(lines) == 3
        assert "FAILED" in lines[2]
        assert "0.6667" in lines[1]
