"""Corpus loading, synthetic generation, splitting, label-embedding pretraining."""

from .corpus import (
    CorpusError,
    DEFAULT_L_MAX,
    EOS_ID,
    Example,
    MAX_DESC_TOKENS,
    PAD_ID,
    RESERVED_TOKENS,
    RawRecord,
    UNK_ID,
    Vocab,
    build_vocabs,
    encode_records,
    load_corpus,
    parse_records,
    split_corpus,
    write_corpus,
)
from .label_embeddings import pretrain_label_embeddings
from .synth import (
    SEPARATOR,
    SynthConfig,
    SynthMeta,
    ensure_split_coverage,
    generate_synthetic,
    oracle_predict,
)

__all__ = [
    "CorpusError",
    "DEFAULT_L_MAX",
    "EOS_ID",
    "Example",
    "MAX_DESC_TOKENS",
    "PAD_ID",
    "RESERVED_TOKENS",
    "RawRecord",
    "SEPARATOR",
    "SynthConfig",
    "SynthMeta",
    "UNK_ID",
    "Vocab",
    "build_vocabs",
    "encode_records",
    "ensure_split_coverage",
    "generate_synthetic",
    "load_corpus",
    "oracle_predict",
    "parse_records",
    "pretrain_label_embeddings",
    "split_corpus",
    "write_corpus",
]
