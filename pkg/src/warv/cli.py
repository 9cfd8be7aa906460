"""Command-line entry point.

Exit status: 0 on success, 1 on invalid input or configuration, 2 on any
other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import corpus, pipeline, stats
from .errors import StageError, ValidationError, WarvError

logger = logging.getLogger("warv")


def _cmd_train(args):
    cfg = pipeline.RunConfig.load(args.config)
    report = pipeline.run_pipeline(cfg)
    print(f"accuracy {report.accuracy:.4f} on {report.n} test reviews -> {cfg.output_dir}")
    return 0


def _cmd_stats(args):
    cfg = pipeline.RunConfig.load(args.config)
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with pipeline.stage("corpus"):
        train_ds = pipeline.load_splits(cfg)["train"]
    with pipeline.stage("stats"):
        word_stats = stats.compute_word_stats(train_ds)
        rank = stats.rank_words(word_stats, cfg["filter"]["population_stddev"])
        word_stats.to_tsv(out / "stats.tsv")
        rank.to_tsv(out / "rank.tsv")
    print(f"{len(word_stats)} words, {word_stats.total_tokens()} tokens -> {out}")
    return 0


def _cmd_predict(args):
    run = pipeline.load_run(args.run_dir)
    sw = pipeline.load_stopword_set(run.config)
    with pipeline.stage("corpus"):
        ds = corpus.load_reviews(args.kind, args.input, sw)
    with pipeline.stage("predict"):
        probs = pipeline.predict_dataset(run, ds)
        pipeline.write_predictions(args.out, ds.ids, probs)
    print(f"{len(ds)} predictions -> {args.out}")
    return 0


def _read_gold(path):
    path = Path(path)
    if path.suffix == ".jsonl":
        ds = corpus.load_reviews("jsonl", path, frozenset())
        return ds.ids, [r.label for r in ds]
    return pipeline.read_labels(path)


def _cmd_evaluate(args):
    ids, pred, probs = pipeline.read_predictions(args.predictions)
    gold_ids, gold = _read_gold(args.labels)
    lookup = dict(zip(gold_ids, gold))
    missing = [i for i in ids if i not in lookup]
    if missing or len(ids) != len(gold_ids):
        raise ValidationError(f"predictions and labels cover different reviews ({len(missing)} unmatched)")
    report = pipeline.evaluate(pred, [lookup[i] for i in ids], n_classes=probs.shape[1])
    if args.out:
        pipeline.write_json(args.out, report.to_dict())
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_ensemble(args):
    path = Path(args.definition)
    try:
        defn = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e.msg})") from None
    report = pipeline.run_ensemble(defn, path.parent)
    print(json.dumps(report, indent=2))
    return 0


def _cmd_gradcheck(args):
    from .gradcheck import run_suite
    cases = run_suite(args.ffnn, args.cnn, args.seed, args.h)
    worst = 0.0
    for case in cases:
        r = case.result
        worst = max(worst, r.max_error)
        print(f"{'ok  ' if r.passed(args.tol) else 'FAIL'} {r.max_error:.2e} "
              f"({r.n_checked} checked, {r.n_skipped} kinks skipped)  {case.name}")
    print(f"max relative error {worst:.2e} (tolerance {args.tol:g})")
    return 0 if worst < args.tol else 1


def _cmd_synth(args):
    from .synthetic import make_corpus, write_corpus
    c = make_corpus(args.reviews, args.vocab, args.dim, args.dim, ternary=args.ternary, seed=args.seed)
    paths = write_corpus(c, args.out_dir)
    config = {
        "embeddings": [{"path": "word2vec.txt", "format": "word2vec-text", "dim": args.dim},
                       {"path": "glove.txt", "format": "glove-text", "dim": args.dim}],
        "data": {"train": {"kind": "jsonl", "path": "reviews.jsonl"}},
        "weighting": {"scheme": "uniform"},
        "output_dir": "run-arv",
    }
    pipeline.write_json(Path(args.out_dir) / "config.json", config)
    print(f"wrote {', '.join(str(p) for p in paths.values())} and config.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the full pipeline for a config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("stats", help="write word statistics and the filter ranking")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: the config's output_dir)")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("predict", help="score a dataset with a trained run")
    p.add_argument("run_dir")
    p.add_argument("input")
    p.add_argument("--kind", choices=("jsonl", "imdb-dir"), default="jsonl")
    p.add_argument("--out", default="predictions.tsv")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="accuracy and confusion of a predictions file")
    p.add_argument("predictions")
    p.add_argument("labels", help="split_*.tsv label file or a .jsonl dataset")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ensemble", help="combine finished runs")
    p.add_argument("definition")
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("gradcheck", help="finite-difference check of backprop")
    p.add_argument("--ffnn", type=int, default=20)
    p.add_argument("--cnn", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("synth", help="write a planted-signal demo corpus and config")
    p.add_argument("out_dir")
    p.add_argument("--reviews", type=int, default=500)
    p.add_argument("--vocab", type=int, default=100)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--ternary", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)
    return parser


def _is_validation(e: BaseException) -> bool:
    if isinstance(e, StageError):
        e = e.cause
    return isinstance(e, (ValidationError, FileNotFoundError))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (WarvError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1 if _is_validation(e) else 2
