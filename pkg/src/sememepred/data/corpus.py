"""Corpus records, vocabularies, deterministic splitting.

Corpus files are UTF-8 line-delimited JSON records with exactly the fields
word (string), descriptions (array of strings, one per resource) and
labels (array of strings). Description text is tokenized per Unicode
scalar so the pipeline stays language-neutral.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

PAD_ID, UNK_ID, EOS_ID = 0, 1, 2
RESERVED_TOKENS = ("<pad>", "<unk>", "<eos>")
MAX_DESC_TOKENS = 256
DEFAULT_L_MAX = 8


class CorpusError(ValueError):
    """Malformed corpus record; message carries the offending line number."""


class Vocab:
    """Bijection between surface tokens and contiguous ids, ids 0..2 reserved."""

    def __init__(self):
        self.id_to_token: list[str] = list(RESERVED_TOKENS)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(RESERVED_TOKENS)}

    def add(self, token: str) -> int:
        tid = self.token_to_id.get(token)
        if tid is None:
            tid = len(self.id_to_token)
            self.token_to_id[token] = tid
            self.id_to_token.append(token)
        return tid

    def encode(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode(self, tid: int) -> str:
        return self.id_to_token[tid]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def non_reserved_ids(self) -> list[int]:
        return list(range(len(RESERVED_TOKENS), len(self.id_to_token)))


@dataclass
class Example:
    """One word with per-resource description token ids and gold label ids."""
    word: str
    descriptions: list[list[int]]
    labels: list[int]

    def nonempty_resources(self) -> list[int]:
        return [i for i, d in enumerate(self.descriptions) if d]


@dataclass
class RawRecord:
    word: str
    descriptions: list[str]
    labels: list[str]
    line: int = 0


def parse_records(path: str, l_max: int = DEFAULT_L_MAX) -> list[RawRecord]:
    """Read and validate raw string records from a corpus file."""
    records: list[RawRecord] = []
    resource_count = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            for key in ("word", "descriptions", "labels"):
                if key not in obj:
                    raise CorpusError(f"{path}:{lineno}: missing field {key!r}")
            word = obj["word"]
            descriptions = obj["descriptions"]
            labels = obj["labels"]
            if not isinstance(word, str) or not isinstance(descriptions, list) \
                    or not isinstance(labels, list):
                raise CorpusError(f"{path}:{lineno}: wrong field types")
            if not labels:
                raise CorpusError(f"{path}:{lineno}: record has no labels")
            if len(labels) > l_max:
                raise CorpusError(
                    f"{path}:{lineno}: {len(labels)} labels exceeds the cap of {l_max}")
            if len(set(labels)) != len(labels):
                raise CorpusError(f"{path}:{lineno}: duplicate labels in record")
            if not any(d for d in descriptions):
                raise CorpusError(f"{path}:{lineno}: all descriptions are empty")
            if resource_count is None:
                resource_count = len(descriptions)
            elif len(descriptions) != resource_count:
                raise CorpusError(
                    f"{path}:{lineno}: expected {resource_count} descriptions, "
                    f"got {len(descriptions)}")
            records.append(RawRecord(word, list(descriptions), list(labels), lineno))
    if not records:
        logger.warning("corpus file %s is empty", path)
    return records


def build_vocabs(records: list[RawRecord]) -> tuple[Vocab, Vocab]:
    """Character and label vocabularies from (training) records."""
    char_vocab, label_vocab = Vocab(), Vocab()
    for rec in records:
        for desc in rec.descriptions:
            for ch in desc:
                char_vocab.add(ch)
        for lab in rec.labels:
            label_vocab.add(lab)
    return char_vocab, label_vocab


def encode_records(records: list[RawRecord], char_vocab: Vocab,
                   label_vocab: Vocab) -> list[Example]:
    """Map raw records to id space; unknown chars become UNK, unknown gold
    labels are dropped with a warning (they cannot be scored)."""
    examples: list[Example] = []
    truncated = 0
    for rec in records:
        descs = []
        for desc in rec.descriptions:
            chars = list(desc)
            if len(chars) > MAX_DESC_TOKENS:
                chars = chars[:MAX_DESC_TOKENS]
                truncated += 1
            descs.append([char_vocab.encode(c) for c in chars])
        label_ids = []
        for lab in rec.labels:
            if lab in label_vocab:
                label_ids.append(label_vocab.token_to_id[lab])
            else:
                logger.warning("line %d: label %r not in training vocab, dropped",
                               rec.line, lab)
        if not label_ids:
            raise CorpusError(
                f"line {rec.line}: no labels survive vocabulary encoding")
        examples.append(Example(rec.word, descs, label_ids))
    if truncated:
        logger.warning("truncated %d descriptions at %d tokens",
                       truncated, MAX_DESC_TOKENS)
    return examples


def load_corpus(path: str, char_vocab: Vocab | None = None,
                label_vocab: Vocab | None = None,
                l_max: int = DEFAULT_L_MAX) -> tuple[list[Example], Vocab, Vocab]:
    """Load a corpus file.

    Without vocabularies (the training file) they are built from the file
    itself; with vocabularies (dev/test) encoding never grows them.
    """
    records = parse_records(path, l_max=l_max)
    if char_vocab is None or label_vocab is None:
        char_vocab, label_vocab = build_vocabs(records)
    return encode_records(records, char_vocab, label_vocab), char_vocab, label_vocab


def write_corpus(records: list[RawRecord] | list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if isinstance(rec, RawRecord):
                obj = {"word": rec.word, "descriptions": rec.descriptions,
                       "labels": rec.labels}
            else:
                obj = {"word": rec["word"], "descriptions": rec["descriptions"],
                       "labels": rec["labels"]}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def split_corpus(items: list, seed: int) -> tuple[list, list, list]:
    """Deterministic 80/10/10 split: floor(0.8n) / floor(0.1n) / remainder."""
    n = len(items)
    if n < 10:
        raise ValueError(f"need at least 10 examples to split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(0.8 * n)
    n_dev = int(0.1 * n)
    train = [items[i] for i in order[:n_train]]
    dev = [items[i] for i in order[n_train:n_train + n_dev]]
    test = [items[i] for i in order[n_train + n_dev:]]
    return train, dev, test
