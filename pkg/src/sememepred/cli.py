"""Command-line surface: generate, train, eval, predict, gradcheck.

Configuration comes from an optional key=value file (--config) overridden
by repeatable --set key=value flags; the SEMEMEPRED_SEED environment
variable overrides the seed everywhere. Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import baselines as bl
from . import checks
from .bundle import (
    ALL_KINDS,
    CLASSICAL_KINDS,
    NEURAL_KINDS,
    SEQ2SEQ_KINDS,
    ModelBundle,
    classical_params,
    load_model,
    save_model,
)
from .data.corpus import (
    CorpusError,
    Example,
    Vocab,
    encode_records,
    load_corpus,
    parse_records,
    split_corpus,
    write_corpus,
)
from .data.synth import SynthConfig, SynthMeta, ensure_split_coverage, \
    generate_synthetic, oracle_predict
from .evaluate import compare, format_table, write_report
from .model import PRESETS, HyperParams
from .ndcore import NonFiniteError, set_checked
from .training import TrainingDiverged, train_seq2seq

logger = logging.getLogger(__name__)

USAGE_ERROR, DATA_ERROR, NUMERIC_ERROR = 1, 2, 3
SEED_ENV = "SEMEMEPRED_SEED"


class CliError(Exception):
    def __init__(self, message: str, code: int = USAGE_ERROR):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise CliError(message, USAGE_ERROR)


def parse_kv_file(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def gather_config(args) -> dict[str, str]:
    cfg: dict[str, str] = {}
    if getattr(args, "config", None):
        cfg.update(parse_kv_file(args.config))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise CliError(f"--set needs key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = str(args.seed)
    if os.environ.get(SEED_ENV):
        cfg["seed"] = os.environ[SEED_ENV]
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _ints(value: str) -> list[int]:
    return [int(v) for v in value.split(",") if v.strip()]


def build_synth_config(cfg: dict[str, str]) -> SynthConfig:
    sc = SynthConfig()
    casts = {
        "num_labels": int, "num_examples": int, "resource_count": int,
        "tokens_per_label": int, "alphabet_size": int, "seed": int,
        "noise_rate": float, "run_bias": float, "span_order": str, "span_parts": int, "zipf_exponent": float, "missing_resource_rate": float, "false_span_rate": float, "cluster_count": int, "span_dropout": float,
        "noise_placement": str,
        "set_size_weights": _floats, "reveal_fractions": _floats,
    }
    for key, value in cfg.items():
        if key not in casts:
            raise CliError(f"unknown generator config key {key!r}")
        setattr(sc, key, casts[key](value))
    if len(sc.reveal_fractions) != sc.resource_count:
        if "reveal_fractions" not in cfg:
            sc.reveal_fractions = tuple([0.6] * sc.resource_count) \
                if sc.resource_count > 1 else (1.0,)
    try:
        sc.validate()
    except ValueError as exc:
        raise CliError(str(exc))
    return sc


def build_hyper(cfg: dict[str, str], preset: str) -> HyperParams:
    if preset not in PRESETS:
        raise CliError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    hyper = dataclasses.replace(PRESETS[preset])
    casts = {"char_embed_dim": int, "label_embed_dim": int, "hidden_dim": int,
             "batch_size": int, "epochs": int, "l_max": int,
             "learning_rate": float, "seed": int}
    for key, cast in casts.items():
        if key in cfg:
            setattr(hyper, key, cast(cfg[key]))
    try:
        hyper.validate()
    except ValueError as exc:
        raise CliError(str(exc))
    return hyper


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = gather_config(args)
    sc = build_synth_config(cfg)
    records, meta = generate_synthetic(sc)
    train, dev, test = split_corpus(records, sc.seed)
    swaps = ensure_split_coverage(train, [dev, test])
    os.makedirs(args.out, exist_ok=True)
    paths = {}
    for name, recs in (("train", train), ("dev", dev), ("test", test)):
        path = os.path.join(args.out, f"{name}.jsonl")
        write_corpus(recs, path)
        paths[name] = path
    meta.save(os.path.join(args.out, "synth_meta.json"))

    sizes = [len(r.labels) for r in records]
    lens = [len(d) for r in records for d in r.descriptions]
    print(f"generated {len(records)} examples "
          f"({len(train)}/{len(dev)}/{len(test)} train/dev/test)")
    print(f"labels: {sc.num_labels}, mean set size {np.mean(sizes):.2f}, "
          f"mean description length {np.mean(lens):.1f}")
    if swaps:
        print(f"coverage swaps into train: {swaps}")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _restrict_examples(examples: list[Example], columns: list[int]) -> list[Example]:
    out = []
    for ex in examples:
        descs = [list(ex.descriptions[c]) if c < len(ex.descriptions) else []
                 for c in columns]
        out.append(Example(ex.word, descs, list(ex.labels)))
    return out


def cmd_train(args) -> int:
    cfg = gather_config(args)
    if args.model not in ALL_KINDS:
        raise CliError(f"unknown model {args.model!r}; choose from {ALL_KINDS}")
    hyper = build_hyper(cfg, args.preset)
    seed = int(cfg.get("seed", hyper.seed))
    hyper.seed = seed
    set_checked(args.checked)

    train_examples, char_vocab, label_vocab = load_corpus(args.train,
                                                          l_max=hyper.l_max)
    if not train_examples:
        raise CorpusError(f"{args.train}: training corpus is empty")
    dev_examples: list[Example] = []
    if args.dev:
        dev_examples, _, _ = load_corpus(args.dev, char_vocab, label_vocab,
                                         l_max=hyper.l_max)
    columns = _ints(args.resources) if args.resources else \
        list(range(len(train_examples[0].descriptions)))
    train_r = _restrict_examples(train_examples, columns)
    dev_r = _restrict_examples(dev_examples, columns)

    log_path = args.out + ".trainlog"

    def log_fn(row: dict) -> None:
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    extra_meta = {"config_hash": config_hash({**cfg, "model": args.model}),
                  "seed": seed}

    if args.model in SEQ2SEQ_KINDS:
        loss_mode = cfg.get("loss.mode",
                            "soft" if args.model == "ld-seq2seq" else "hard")
        if loss_mode not in ("soft", "hard"):
            raise CliError(f"loss.mode must be soft or hard, got {loss_mode!r}")
        result = train_seq2seq(train_r, dev_r, hyper, char_vocab, label_vocab,
                               resources=len(columns), loss_mode=loss_mode,
                               seed=seed,
                               pretrain_embeddings=not args.no_pretrain,
                               feed_own=args.feed_own, log_fn=log_fn)
        extra_meta.update(loss_mode=loss_mode, best_epoch=result.best_epoch,
                          best_dev_f1=result.best_dev_f1)
        save_model(args.out, args.model, result.params, char_vocab, label_vocab,
                   hyper, columns, extra_meta)
    elif args.model == "rnn-mllr":
        params, history = bl.train_rnn_mllr(train_r, dev_r, hyper,
                                            len(char_vocab), len(label_vocab),
                                            resources=len(columns), seed=seed,
                                            log_fn=log_fn)
        if history:
            extra_meta["best_dev_f1"] = max(h["dev_f1"] for h in history)
        save_model(args.out, args.model, params, char_vocab, label_vocab,
                   hyper, columns, extra_meta)
    else:
        clf = _fit_classical(args.model, cfg, train_r, label_vocab)
        params, extra = classical_params(args.model, clf)
        space = bl.FeatureSpace.build(train_r)
        extra_meta.update(extra)
        extra_meta["feature_space"] = [list(k) for k in space.index]
        save_model(args.out, args.model, params, char_vocab, label_vocab,
                   hyper, columns, extra_meta)

    print(f"saved checkpoint {args.out} (model={args.model}, seed={seed})")
    return 0


def _fit_classical(kind: str, cfg: dict[str, str], train: list[Example],
                   label_vocab: Vocab):
    space = bl.FeatureSpace.build(train)
    x, label_sets = bl.baseline_dataset(train, space)
    epochs = int(cfg.get("baseline.epochs", 200))
    lr = float(cfg.get("baseline.lr", 0.01))
    if kind == "mlknn":
        k = int(cfg.get("baseline.k", 10))
        smooth = float(cfg.get("baseline.smooth", 1.0))
        return bl.MlKnn(k=min(k, len(train)), smooth=smooth).fit(
            x, label_sets, len(label_vocab))
    if kind == "br":
        return bl.BinaryRelevance(epochs=epochs, lr=lr).fit(
            x, label_sets, label_vocab.non_reserved_ids())
    if kind == "lp":
        return bl.LabelPowerset(epochs=epochs, lr=lr).fit(x, label_sets)
    if kind == "cc":
        if "baseline.order" in cfg:
            order = [label_vocab.token_to_id[name] for name in
                     cfg["baseline.order"].split(",")]
        else:
            order = bl.frequency_order(label_sets, label_vocab.non_reserved_ids())
        return bl.ClassifierChain(epochs=epochs, lr=lr).fit(x, label_sets, order)
    raise CliError(f"unknown classical baseline {kind!r}")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

# main-table rows follow the published comparison order; ablation rows
# (per-resource restrictions, then the unrestricted model) come after
_TABLE_ORDER = ("mlknn", "lp", "br", "cc", "rnn-mllr", "basic-seq2seq",
                "ld-seq2seq")


def cmd_eval(args) -> int:
    cfg = gather_config(args)
    seed = int(cfg.get("seed", 0))
    set_checked(args.checked)
    records = parse_records(args.test)
    if not records:
        raise CorpusError(f"{args.test}: test corpus is empty")
    chash = config_hash(cfg)
    allowed = _ints(args.resources) if args.resources else None

    main_rows: list[tuple[int, dict]] = []
    ablation_rows: list[dict] = []
    for spec_item in args.model or []:
        if "=" not in spec_item:
            raise CliError(f"--model needs NAME=CHECKPOINT, got {spec_item!r}")
        name, prefix = spec_item.split("=", 1)
        bundle = load_model(prefix)
        examples = encode_records(records, bundle.char_vocab, bundle.label_vocab)
        golds = [set(ex.labels) for ex in examples]
        fn = bundle.predictor(allowed_resources=allowed)
        order = _TABLE_ORDER.index(bundle.kind) if bundle.kind in _TABLE_ORDER \
            else len(_TABLE_ORDER)
        for row in compare([(name, fn)], examples, golds, split="test",
                           seed=seed, config_hash=chash):
            main_rows.append((order, row))
        if args.ablation and bundle.kind in NEURAL_KINDS:
            for col in bundle.resources:
                fn_r = bundle.predictor(allowed_resources=[col])
                ablation_rows += compare(
                    [(f"{name}[res={col}]", fn_r)], examples, golds,
                    split="test", seed=seed, config_hash=chash)
            ablation_rows += compare(
                [(f"{name}[multi]", fn)], examples, golds,
                split="test", seed=seed, config_hash=chash)

    main_rows.sort(key=lambda t: t[0])
    rows = [row for _, row in main_rows] + ablation_rows

    if args.oracle:
        meta = SynthMeta.load(args.oracle)
        indices = allowed

        def oracle_fn(rec):
            return oracle_predict(rec.descriptions, meta, resources=indices)
        golds = [set(rec.labels) for rec in records]
        rows += compare([("oracle", oracle_fn)], records, golds, split="test",
                        seed=seed, config_hash=chash)

    if not rows:
        raise CliError("nothing to evaluate: pass --model and/or --oracle")
    print(format_table(rows))
    if args.report:
        write_report(rows, args.report)
        print(f"report written to {args.report}")
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def cmd_predict(args) -> int:
    bundle = load_model(args.checkpoint)
    texts = list(args.desc or [])
    n_res = len(bundle.resources)
    if len(texts) > n_res:
        raise CliError(f"model takes {n_res} descriptions, got {len(texts)}")
    texts += [""] * (n_res - len(texts))
    if not any(texts):
        raise CliError("at least one description must be nonempty")
    descs = [[bundle.char_vocab.encode(c) for c in t] for t in texts]
    ex = Example("query", descs, [])
    # the bundle maps corpus columns onto model inputs; here the inputs are
    # already in model order, so feed them through a column-identity example
    ex.descriptions = descs
    bundle.meta = dict(bundle.meta)
    bundle.meta["resources"] = list(range(n_res))
    fn = bundle.predictor()
    labels = sorted(fn(ex))
    print(" ".join(bundle.label_vocab.decode(i) for i in labels))
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    set_checked(True)
    results = checks.run_all(seed=args.seed, epsilon=args.epsilon)
    failed = 0
    for name, err in results:
        ok = err < args.tolerance
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} max_rel_err={err:.3e}")
    if failed:
        print(f"{failed} of {len(results)} gradient checks failed "
              f"at tolerance {args.tolerance}")
        return NUMERIC_ERROR
    print(f"all {len(results)} gradient checks passed at tolerance {args.tolerance}")
    return 0


# ---------------------------------------------------------------------------
# parser & entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sememepred",
                     description="semantic label prediction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override (repeatable)")
        p.add_argument("--seed", type=int, help="root random seed")

    g = sub.add_parser("generate", help="write a synthetic corpus")
    common(g)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train a model and save a checkpoint")
    common(t)
    t.add_argument("--train", required=True)
    t.add_argument("--dev")
    t.add_argument("--model", required=True, help=f"one of {ALL_KINDS}")
    t.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    t.add_argument("--out", required=True, help="checkpoint prefix")
    t.add_argument("--resources", help="corpus description columns, e.g. 0,1")
    t.add_argument("--no-pretrain", action="store_true",
                   help="skip label-embedding pretraining")
    t.add_argument("--feed-own", action="store_true",
                   help="feed the decoder its own previous argmax in training")
    t.add_argument("--checked", action="store_true",
                   help="keep the NaN/Inf scan on during training")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="compare models on a test corpus")
    common(e)
    e.add_argument("--test", required=True)
    e.add_argument("--model", action="append", metavar="NAME=CHECKPOINT")
    e.add_argument("--oracle", help="synth_meta.json for the span oracle row")
    e.add_argument("--resources", help="restrict encoder inputs, e.g. 0")
    e.add_argument("--ablation", action="store_true",
                   help="add per-resource rows for neural models")
    e.add_argument("--report", help="machine-readable report path")
    e.add_argument("--checked", action="store_true")
    e.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="labels for one set of descriptions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--desc", action="append",
                   help="description text, one per resource")
    p.set_defaults(fn=cmd_predict)

    c = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    c.add_argument("--tolerance", type=float, default=1e-4)
    c.add_argument("--epsilon", type=float, default=1e-5)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CorpusError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except TrainingDiverged as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        print(f"offending batch: {exc.batch_words}", file=sys.stderr)
        return NUMERIC_ERROR
    except (NonFiniteError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
