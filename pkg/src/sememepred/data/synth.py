"""Synthetic corpus generator and its span-reading oracle.

Each label owns a fixed character span (all spans the same length, all
distinct, drawn from a shared alphabet). A resource reveals a configured
subset of the label universe; its description for an example is the
canonical-order concatenation of the spans of the revealed gold labels,
separated by a delimiter character, with noise characters injected at
span boundaries at the configured rate. Noise characters are sampled from
the spans of labels *outside* the example's gold set, so they look like
genuine signal. The delimiter guarantees that on noise-free data no span
can appear by accident across a boundary, which makes the span-reading
oracle exact there.

Gold label order is a fixed global canonical order (the label index)
restricted to the sampled set.
"""
from __future__ import annotations

import json
import string
from dataclasses import dataclass, field

import numpy as np

from .corpus import RawRecord

SEPARATOR = "."
_ALPHABET_POOL = string.ascii_lowercase + string.ascii_uppercase + string.digits


@dataclass
class SynthConfig:
    num_labels: int = 50
    num_examples: int = 2500
    resource_count: int = 2
    set_size_weights: tuple[float, ...] = (0.10, 0.25, 0.30, 0.20, 0.10, 0.05)
    tokens_per_label: int = 4
    alphabet_size: int = 14
    noise_rate: float = 0.2
    reveal_fractions: tuple[float, ...] = (0.6, 0.6)
    # fraction of label sets drawn from correlated groups rather than
    # uniformly (labels co-occur in patterns, like real ontologies): with
    # cluster_count == 0 a correlated set is a consecutive canonical run;
    # with clusters it is a subset of one latent cluster, whose members are
    # scattered across the canonical order
    run_bias: float = 0.0
    cluster_count: int = 0
    # "canonical" writes spans in gold order; "shuffled" permutes them per
    # description (surface order carries no information about label order)
    span_order: str = "canonical"
    # "gaps" keeps spans contiguous (noise only between them); "everywhere"
    # lets noise land inside spans, which corrupts n-gram evidence while a
    # sequential reader can still skip over it
    noise_placement: str = "gaps"
    # number of pieces a label's token inventory is written as; with 2, the
    # halves land at independent positions, so evidence for one label is
    # scattered across the description instead of contiguous
    span_parts: int = 1
    # label frequency skew: 0 draws labels uniformly, larger values make
    # low-index labels common and the tail rare (real label inventories
    # are heavy-tailed)
    zipf_exponent: float = 0.0
    # probability that an example is missing one resource's description
    # entirely (a word absent from that source); never empties all of them
    missing_resource_rate: float = 0.0
    # probability that a description carries the complete span of one
    # label OUTSIDE the gold set (misleading literal evidence); detectors
    # that fire on isolated evidence pay in precision
    false_span_rate: float = 0.0
    # per-character omission rate when spans are written (at least one
    # character always survives): evidence stays discriminative but never
    # certain, like paraphrased descriptions
    span_dropout: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.num_labels < 2:
            raise ValueError(f"num_labels must be >= 2, got {self.num_labels}")
        if self.num_examples < 10:
            raise ValueError(f"num_examples must be >= 10, got {self.num_examples}")
        if not (0.0 <= self.noise_rate < 1.0):
            raise ValueError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.resource_count < 1:
            raise ValueError("resource_count must be >= 1")
        if len(self.reveal_fractions) != self.resource_count:
            raise ValueError("need one reveal fraction per resource")
        for f in self.reveal_fractions:
            if not (0.0 < f <= 1.0):
                raise ValueError(f"reveal fraction {f} outside (0, 1]")
        if len(self.set_size_weights) > 8:
            raise ValueError("label sets larger than 8 are not supported")
        if self.alphabet_size < 2 or self.alphabet_size > len(_ALPHABET_POOL):
            raise ValueError(f"alphabet_size must be in [2, {len(_ALPHABET_POOL)}]")
        if self.tokens_per_label < 1:
            raise ValueError("tokens_per_label must be >= 1")
        if self.alphabet_size ** self.tokens_per_label < 4 * self.num_labels:
            raise ValueError("alphabet too small to give each label a distinct span")
        if not (0.0 <= self.run_bias <= 1.0):
            raise ValueError(f"run_bias must be in [0, 1], got {self.run_bias}")
        if self.span_order not in ("canonical", "shuffled"):
            raise ValueError(f"span_order must be canonical or shuffled, "
                             f"got {self.span_order!r}")
        if self.noise_placement not in ("gaps", "everywhere"):
            raise ValueError(f"noise_placement must be gaps or everywhere, "
                             f"got {self.noise_placement!r}")
        if self.span_parts not in (1, 2):
            raise ValueError(f"span_parts must be 1 or 2, got {self.span_parts}")
        if self.zipf_exponent < 0.0:
            raise ValueError(f"zipf_exponent must be >= 0, got {self.zipf_exponent}")
        if not (0.0 <= self.missing_resource_rate < 1.0):
            raise ValueError(f"missing_resource_rate must be in [0, 1), "
                             f"got {self.missing_resource_rate}")
        if self.missing_resource_rate > 0.0 and self.resource_count < 2:
            raise ValueError("missing resources need at least 2 resources")
        if not (0.0 <= self.false_span_rate < 1.0):
            raise ValueError(f"false_span_rate must be in [0, 1), "
                             f"got {self.false_span_rate}")
        if self.cluster_count < 0 or self.cluster_count > self.num_labels:
            raise ValueError(f"cluster_count must be in [0, num_labels], "
                             f"got {self.cluster_count}")
        if not (0.0 <= self.span_dropout < 1.0):
            raise ValueError(f"span_dropout must be in [0, 1), "
                             f"got {self.span_dropout}")
        if self.tokens_per_label % self.span_parts != 0:
            raise ValueError("tokens_per_label must divide evenly into span_parts")
        part_len = self.tokens_per_label // self.span_parts
        if self.alphabet_size ** part_len < 3 * self.span_parts * self.num_labels:
            raise ValueError("alphabet too small for distinct span parts")


@dataclass
class SynthMeta:
    """Everything the oracle needs to decode generated descriptions."""
    label_names: list[str]
    spans: dict[str, str]
    reveal_sets: list[list[str]]
    separator: str = SEPARATOR
    config: dict = field(default_factory=dict)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"label_names": self.label_names, "spans": self.spans,
                       "reveal_sets": self.reveal_sets, "separator": self.separator,
                       "config": self.config}, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "SynthMeta":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(obj["label_names"], obj["spans"], obj["reveal_sets"],
                   obj["separator"], obj.get("config", {}))


def _label_names(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"L{i:0{width}d}" for i in range(n)]


def _sample_spans(cfg: SynthConfig, rng: np.random.Generator) -> list[str]:
    """One token inventory per label: span_parts pieces of equal length,
    every piece globally distinct so piece detection is unambiguous."""
    alphabet = _ALPHABET_POOL[:cfg.alphabet_size]
    part_len = cfg.tokens_per_label // cfg.span_parts
    spans: list[str] = []
    seen: set[str] = set()
    while len(spans) < cfg.num_labels:
        parts = []
        for _ in range(cfg.span_parts):
            while True:
                part = "".join(alphabet[i] for i in
                               rng.integers(0, cfg.alphabet_size, size=part_len))
                if part not in seen:
                    seen.add(part)
                    parts.append(part)
                    break
        spans.append("".join(parts))
    return spans


def span_pieces(span: str, span_parts: int) -> list[str]:
    part_len = len(span) // span_parts
    return [span[i * part_len:(i + 1) * part_len] for i in range(span_parts)]


def _reveal_sets(cfg: SynthConfig, rng: np.random.Generator) -> list[list[int]]:
    """Assign labels to resources: round-robin base (so the union covers
    everything), then top each resource up to its configured fraction."""
    labels = list(rng.permutation(cfg.num_labels))
    sets: list[set[int]] = [set() for _ in range(cfg.resource_count)]
    for i, lab in enumerate(labels):
        sets[i % cfg.resource_count].add(int(lab))
    for r, frac in enumerate(cfg.reveal_fractions):
        target = max(len(sets[r]), int(np.ceil(frac * cfg.num_labels)))
        target = min(target, cfg.num_labels)
        pool = [l for l in range(cfg.num_labels) if l not in sets[r]]
        extra = rng.permutation(len(pool))
        for idx in extra[:target - len(sets[r])]:
            sets[r].add(pool[int(idx)])
    return [sorted(s) for s in sets]


def _label_weights(cfg: SynthConfig) -> np.ndarray:
    if cfg.zipf_exponent == 0.0:
        return np.full(cfg.num_labels, 1.0 / cfg.num_labels)
    w = 1.0 / np.arange(1, cfg.num_labels + 1) ** cfg.zipf_exponent
    return w / w.sum()


def _label_clusters(cfg: SynthConfig, rng: np.random.Generator) -> list[list[int]]:
    """Latent co-occurrence groups, overlapping and scattered across the
    canonical order: strong pairwise structure without a small closed set
    of whole-group combinations."""
    k = cfg.cluster_count
    if not k:
        return []
    group_size = max(2, int(np.ceil(2.5 * cfg.num_labels / k)))
    clusters = []
    for _ in range(k):
        members = rng.choice(cfg.num_labels, size=min(group_size, cfg.num_labels),
                             replace=False)
        clusters.append(sorted(int(m) for m in members))
    return clusters


def _sample_label_set(cfg: SynthConfig, size: int, weights: np.ndarray,
                      clusters: list[list[int]],
                      rng: np.random.Generator) -> set[int]:
    if cfg.run_bias > 0.0 and rng.random() < cfg.run_bias:
        if clusters:
            members = clusters[int(rng.integers(0, len(clusters)))]
            take = min(size, len(members))
            chosen = set(int(l) for l in rng.choice(members, size=take,
                                                    replace=False))
            while len(chosen) < size:
                extra = int(rng.choice(cfg.num_labels, p=weights))
                chosen.add(extra)
            return chosen
        start_w = weights[:cfg.num_labels - size + 1]
        start = int(rng.choice(len(start_w), p=start_w / start_w.sum()))
        return set(range(start, start + size))
    return set(int(l) for l in rng.choice(cfg.num_labels, size=size,
                                          replace=False, p=weights))


def _make_description(gold: list[int], revealed: set[int], spans: list[str],
                      cfg: SynthConfig, rng: np.random.Generator) -> str:
    parts = []
    for l in gold:
        if l in revealed:
            parts.extend(span_pieces(spans[l], cfg.span_parts))
    if parts and cfg.false_span_rate > 0.0 \
            and rng.random() < cfg.false_span_rate:
        foreign = [l for l in range(cfg.num_labels) if l not in gold]
        decoy = foreign[int(rng.integers(0, len(foreign)))]
        parts.extend(span_pieces(spans[decoy], cfg.span_parts))
    if cfg.span_dropout > 0.0:
        thinned = []
        for part in parts:
            keep = [c for c in part if rng.random() >= cfg.span_dropout]
            if not keep:
                keep = [part[int(rng.integers(0, len(part)))]]
            thinned.append("".join(keep))
        parts = thinned
    if cfg.span_order == "shuffled" and len(parts) > 1:
        parts = [parts[int(i)] for i in rng.permutation(len(parts))]
    n_clean = sum(len(p) for p in parts)
    n_noise = 0
    if cfg.noise_rate > 0.0 and n_clean > 0:
        n_noise = int(np.floor(cfg.noise_rate / (1.0 - cfg.noise_rate) * n_clean))

    def noise_char() -> str:
        foreign = [l for l in range(cfg.num_labels) if l not in gold]
        lab = foreign[int(rng.integers(0, len(foreign)))]
        return spans[lab][int(rng.integers(0, len(spans[lab])))]

    base = list(SEPARATOR.join(parts))
    if cfg.noise_placement == "everywhere":
        for _ in range(n_noise):
            pos = int(rng.integers(0, len(base) + 1))
            base.insert(pos, noise_char())
        return "".join(base)

    gaps: list[list[str]] = [[] for _ in range(len(parts) + 1)]
    for _ in range(n_noise):
        gaps[int(rng.integers(0, len(gaps)))].append(noise_char())
    pieces: list[str] = []
    for i, part in enumerate(parts):
        pieces.append("".join(gaps[i]))
        if i > 0:
            pieces.append(SEPARATOR)
        pieces.append(part)
    pieces.append("".join(gaps[len(parts)]))
    return "".join(pieces)


def generate_synthetic(cfg: SynthConfig) -> tuple[list[RawRecord], SynthMeta]:
    """Generate a corpus; deterministic under cfg.seed.

    The first num_labels examples are pinned to contain label i so that
    every label occurs at least once in the corpus; example order is then
    shuffled so the pinning does not bias any later split.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    names = _label_names(cfg.num_labels)
    spans = _sample_spans(cfg, rng)
    reveal = _reveal_sets(cfg, rng)
    reveal_lookup = [set(s) for s in reveal]

    sizes = np.arange(1, len(cfg.set_size_weights) + 1)
    weights = np.asarray(cfg.set_size_weights, dtype=float)
    weights = weights / weights.sum()

    label_weights = _label_weights(cfg)
    clusters = _label_clusters(cfg, rng)
    records: list[RawRecord] = []
    for idx in range(cfg.num_examples):
        size = int(rng.choice(sizes, p=weights))
        size = min(size, cfg.num_labels)
        chosen = _sample_label_set(cfg, size, label_weights, clusters, rng)
        if idx < cfg.num_labels and idx not in chosen:
            # coverage pin: example idx must carry label idx
            if len(chosen) >= size and chosen:
                chosen.remove(max(chosen))
            chosen.add(idx)
        gold = sorted(chosen)  # canonical global order
        descs = [_make_description(gold, reveal_lookup[r], spans, cfg, rng)
                 for r in range(cfg.resource_count)]
        if cfg.missing_resource_rate > 0.0 \
                and rng.random() < cfg.missing_resource_rate:
            drop = int(rng.integers(0, cfg.resource_count))
            if any(descs[r] for r in range(cfg.resource_count) if r != drop):
                descs[drop] = ""
        records.append(RawRecord(word=f"w{idx:05d}",
                                 descriptions=descs,
                                 labels=[names[l] for l in gold]))

    order = rng.permutation(cfg.num_examples)
    records = [records[int(i)] for i in order]

    meta = SynthMeta(
        label_names=names,
        spans={names[i]: spans[i] for i in range(cfg.num_labels)},
        reveal_sets=[[names[l] for l in s] for s in reveal],
        config={"num_labels": cfg.num_labels, "num_examples": cfg.num_examples,
                "resource_count": cfg.resource_count,
                "tokens_per_label": cfg.tokens_per_label,
                "alphabet_size": cfg.alphabet_size,
                "noise_rate": cfg.noise_rate,
                "reveal_fractions": list(cfg.reveal_fractions),
                "set_size_weights": list(cfg.set_size_weights),
                "run_bias": cfg.run_bias,
                "span_order": cfg.span_order,
                "noise_placement": cfg.noise_placement,
                "span_parts": cfg.span_parts,
                "zipf_exponent": cfg.zipf_exponent,
                "missing_resource_rate": cfg.missing_resource_rate,
                "false_span_rate": cfg.false_span_rate,
                "cluster_count": cfg.cluster_count,
                "span_dropout": cfg.span_dropout,
                "seed": cfg.seed},
    )
    return records, meta


def ensure_split_coverage(train: list[RawRecord], others: list[list[RawRecord]]
                          ) -> int:
    """Swap examples into train until it covers every label seen anywhere.

    Returns the number of swaps. Deterministic: missing labels are handled
    in sorted order and the swapped-out train example is the first one all
    of whose labels also occur elsewhere in train.
    """
    def coverage(recs):
        cov: dict[str, int] = {}
        for r in recs:
            for lab in r.labels:
                cov[lab] = cov.get(lab, 0) + 1
        return cov

    cov = coverage(train)
    universe = set(cov)
    for part in others:
        for r in part:
            universe.update(r.labels)
    missing = sorted(universe - set(cov))
    swaps = 0
    for lab in missing:
        donor = None
        for part in others:
            for j, r in enumerate(part):
                if lab in r.labels:
                    donor = (part, j)
                    break
            if donor:
                break
        if donor is None:
            continue
        part, j = donor
        victim = None
        for i, r in enumerate(train):
            if all(cov.get(l, 0) > 1 for l in r.labels):
                victim = i
                break
        if victim is None:
            continue
        train[victim], part[j] = part[j], train[victim]
        cov = coverage(train)
        swaps += 1
    return swaps


def oracle_predict(descriptions: list[str], meta: SynthMeta,
                   resources: list[int] | None = None) -> set[str]:
    """Detect every label all of whose span pieces occur in one description."""
    n_parts = int(meta.config.get("span_parts", 1))
    pieces = {name: span_pieces(span, n_parts)
              for name, span in meta.spans.items()}
    found: set[str] = set()
    indices = resources if resources is not None else range(len(descriptions))
    for r in indices:
        if r >= len(descriptions):
            continue
        text = descriptions[r]
        if not text:
            continue
        for name, parts in pieces.items():
            if all(part in text for part in parts):
                found.add(name)
    return found
