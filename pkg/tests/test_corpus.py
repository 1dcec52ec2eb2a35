"""Corpus parsing, vocabularies, and the deterministic split."""
import json
import logging

import numpy as np
import pytest

from sememepred.data import (
    CorpusError,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    Vocab,
    load_corpus,
    split_corpus,
    write_corpus,
)


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def test_reserved_ids():
    vocab = Vocab()
    assert (PAD_ID, UNK_ID, EOS_ID) == (0, 1, 2)
    assert len(vocab) == 3
    assert vocab.encode("missing") == UNK_ID
    tid = vocab.add("x")
    assert vocab.decode(tid) == "x"
    assert vocab.add("x") == tid  # idempotent


def test_basic_record_parse(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"word": "w", "descriptions": ["ab", ""],
                        "labels": ["s1", "s2"]}])
    examples, cv, lv = load_corpus(str(path))
    ex = examples[0]
    assert len(ex.descriptions) == 2
    assert len(ex.descriptions[0]) == 2
    assert ex.descriptions[1] == []
    assert len(ex.labels) == 2
    assert ex.nonempty_resources() == [0]


def test_empty_file_warns(tmp_path, caplog):
    path = tmp_path / "c.jsonl"
    path.write_text("")
    with caplog.at_level(logging.WARNING):
        examples, cv, lv = load_corpus(str(path))
    assert examples == []
    assert len(cv) == 3 and len(lv) == 3
    assert any("empty" in r.message for r in caplog.records)


def test_duplicate_labels_rejected_with_line(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [
        {"word": "ok", "descriptions": ["ab"], "labels": ["x"]},
        {"word": "bad", "descriptions": ["cd"], "labels": ["a", "a"]},
    ])
    with pytest.raises(CorpusError, match=r":2: duplicate"):
        load_corpus(str(path))


def test_missing_labels_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"word": "w", "descriptions": ["ab"]}])
    with pytest.raises(CorpusError, match="missing field 'labels'"):
        load_corpus(str(path))


def test_all_descriptions_empty_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"word": "w", "descriptions": ["", ""], "labels": ["x"]}])
    with pytest.raises(CorpusError, match="all descriptions are empty"):
        load_corpus(str(path))


def test_too_many_labels_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    labels = [f"s{i}" for i in range(9)]
    write_lines(path, [{"word": "w", "descriptions": ["ab"], "labels": labels}])
    with pytest.raises(CorpusError, match="exceeds"):
        load_corpus(str(path))


def test_unknown_chars_map_to_unk(tmp_path):
    train = tmp_path / "train.jsonl"
    test = tmp_path / "test.jsonl"
    write_lines(train, [{"word": "w", "descriptions": ["ab"], "labels": ["x"]}])
    write_lines(test, [{"word": "v", "descriptions": ["aq"], "labels": ["x"]}])
    _, cv, lv = load_corpus(str(train))
    size_before = len(cv)
    examples, _, _ = load_corpus(str(test), cv, lv)
    assert len(cv) == size_before  # vocab never grows on dev/test
    assert examples[0].descriptions[0][1] == UNK_ID


def test_unknown_label_dropped_with_warning(tmp_path, caplog):
    train = tmp_path / "train.jsonl"
    test = tmp_path / "test.jsonl"
    write_lines(train, [{"word": "w", "descriptions": ["ab"], "labels": ["x"]}])
    write_lines(test, [{"word": "v", "descriptions": ["ab"], "labels": ["x", "y"]}])
    _, cv, lv = load_corpus(str(train))
    with caplog.at_level(logging.WARNING):
        examples, _, _ = load_corpus(str(test), cv, lv)
    assert len(examples[0].labels) == 1
    assert any("dropped" in r.message for r in caplog.records)


def test_truncation_at_256_tokens(tmp_path, caplog):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"word": "w", "descriptions": ["a" * 300], "labels": ["x"]}])
    with caplog.at_level(logging.WARNING):
        examples, _, _ = load_corpus(str(path))
    assert len(examples[0].descriptions[0]) == 256
    assert any("truncated" in r.message for r in caplog.records)


def test_write_roundtrip(tmp_path):
    path = tmp_path / "c.jsonl"
    recs = [{"word": "w", "descriptions": ["ab", "c"], "labels": ["x", "y"]}]
    write_corpus(recs, str(path))
    examples, cv, lv = load_corpus(str(path))
    assert examples[0].word == "w"
    assert [lv.decode(i) for i in examples[0].labels] == ["x", "y"]


class TestSplit:
    def test_100_splits_80_10_10(self):
        train, dev, test = split_corpus(list(range(100)), seed=0)
        assert (len(train), len(dev), len(test)) == (80, 10, 10)

    def test_10_splits_8_1_1(self):
        train, dev, test = split_corpus(list(range(10)), seed=0)
        assert (len(train), len(dev), len(test)) == (8, 1, 1)

    def test_fewer_than_10_rejected(self):
        with pytest.raises(ValueError, match="at least 10"):
            split_corpus(list(range(9)), seed=0)

    def test_same_seed_same_partition(self):
        items = list(range(57))
        assert split_corpus(items, seed=9) == split_corpus(items, seed=9)

    def test_partitions_disjoint_and_exhaustive(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(10, 200))
            seed = int(rng.integers(0, 1000))
            items = list(range(n))
            train, dev, test = split_corpus(items, seed=seed)
            combined = train + dev + test
            assert sorted(combined) == items
            assert len(set(combined)) == n
            assert len(train) == int(0.8 * n)
            assert len(dev) == int(0.1 * n)
