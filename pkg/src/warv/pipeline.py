"""Run configuration, evaluation and end-to-end orchestration.

A run is described by one JSON document (see ``DEFAULT_CONFIG``). Relative
paths resolve against the directory of the config file. Every artifact a
run writes is a deterministic function of the config.
"""
from __future__ import annotations

import contextlib
import copy
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import corpus, embeddings, ensemble, stats
from .errors import (EmptyDataset, FormatError, LengthMismatch, StageError, ValidationError,
                     WarvError)
from .features import FeatureBuilder
from .models import ArchitectureSpec
from .nn import TrainConfig, load_model, network_from_dict, network_to_dict, save_model, train

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "embeddings": [
        {"path": None, "format": "word2vec-text", "dim": 300},
        {"path": None, "format": "glove-text", "dim": 300},
    ],
    "data": {
        "train": None,
        "test": None,
        "split": {"fractions": [0.8, 0.1, 0.1], "seed": 0},
        "class_set": "",
    },
    "stopwords": None,
    "weighting": {"scheme": "ratio", "alpha": 1.0, "weighted_mean": False},
    "filter": {"n": 0, "population_stddev": False},
    "model": {
        "kind": "ffnn",
        "hidden": ["d/2"],
        "window": 5,
        "n_filters": None,
        "max_len": None,
        "matrix_weights": True,
        "printed_init_bound": False,
        "seed": 0,
    },
    "train": {"epochs": 50, "batch_size": 32, "seed": 0, "rho": 0.95, "eps": 1e-6},
    "output_dir": "run",
}


def _merge(base, override, where=""):
    if not isinstance(override, dict):
        return copy.deepcopy(override)
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ValidationError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass
class RunConfig:
    values: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        cfg = cls(_merge(DEFAULT_CONFIG, doc), Path(base_dir) if base_dir else Path.cwd())
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON ({e.msg})", e.lineno, path) from None
        return cls.from_dict(doc, path.parent)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.values).encode()).hexdigest()

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return self.path(self.values["output_dir"])

    def validate(self, check_paths: bool = True):
        v = self.values
        embs = v["embeddings"]
        if not isinstance(embs, list) or not 1 <= len(embs) <= 2:
            raise ValidationError("'embeddings' must list one or two tables")
        for e in embs:
            unknown = set(e) - {"path", "format", "dim", "name"}
            if unknown:
                raise ValidationError(f"unknown embedding keys {sorted(unknown)}")
            if not e.get("path"):
                raise ValidationError("every embedding entry needs a 'path'")
            if e.get("format", "glove-text") not in embeddings.FORMATS:
                raise ValidationError(f"unknown embedding format {e.get('format')!r}")
        data = v["data"]
        if not data.get("train"):
            raise ValidationError("'data.train' source is required")
        for src in (data["train"], data["test"]):
            if src is not None and (not isinstance(src, dict) or src.get("kind") not in ("jsonl", "imdb-dir")
                                    or not src.get("path")):
                raise ValidationError("data sources are {'kind': 'jsonl'|'imdb-dir', 'path': ...}")
        fractions = data["split"]["fractions"]
        corpus.split_sizes(0, fractions)
        if data["test"] is not None and fractions[2] != 0:
            raise ValidationError("with a separate test source the test fraction must be 0")
        if v["weighting"]["scheme"] not in stats.SCHEMES:
            raise ValidationError(f"unknown weighting scheme {v['weighting']['scheme']!r}")
        if not isinstance(v["filter"]["n"], int) or v["filter"]["n"] < 0:
            raise ValidationError("filter.n must be a nonnegative integer")
        if v["model"]["kind"] not in ("ffnn", "cnn"):
            raise ValidationError(f"unknown model kind {v['model']['kind']!r}")
        TrainConfig(**v["train"])
        if check_paths:
            paths = [e["path"] for e in embs] + [data["train"]["path"]]
            if data["test"]:
                paths.append(data["test"]["path"])
            if v["stopwords"]:
                paths.append(v["stopwords"])
            for p in paths:
                if not self.path(p).exists():
                    raise ValidationError(f"path does not exist: {self.path(p)}")


# -- evaluation ---------------------------------------------------------------


@dataclass
class EvalReport:
    accuracy: float
    confusion: List[List[int]]
    labels: List[str]
    n: int
    metadata: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # timings vary between runs, so they are logged but never persisted
        return {"accuracy": self.accuracy, "confusion": self.confusion, "labels": self.labels,
                "n": self.n, "metadata": self.metadata}


def _as_indices(values) -> np.ndarray:
    out = []
    for v in values:
        if isinstance(v, str):
            if v not in corpus.LABEL_INDEX:
                raise ValidationError(f"unknown label {v!r}")
            out.append(corpus.LABEL_INDEX[v])
        else:
            out.append(int(v))
    return np.array(out, dtype=np.int64)


def evaluate(predictions, labels, n_classes: Optional[int] = None) -> EvalReport:
    """Accuracy and confusion matrix; ``confusion[true][predicted]``."""
    pred, gold = _as_indices(predictions), _as_indices(labels)
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predictions but {len(gold)} labels")
    if len(pred) == 0:
        raise EmptyDataset("nothing to evaluate")
    if n_classes is None:
        n_classes = max(2, int(max(pred.max(), gold.max())) + 1)
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (gold, pred), 1)
    acc = float(np.trace(conf)) / len(pred)
    return EvalReport(acc, conf.tolist(), list(corpus.LABELS[:n_classes]), len(pred))


# -- artifact files -----------------------------------------------------------


def write_predictions(path, ids: Sequence[str], probs: np.ndarray):
    """TSV ``review_id TAB predicted_label TAB p_1 .. p_C``."""
    with open(path, "w", encoding="utf-8") as fh:
        for rid, row in zip(ids, probs):
            label = corpus.LABELS[int(np.argmax(row))]
            fh.write("\t".join([rid, label] + [repr(float(p)) for p in row]) + "\n")


def read_predictions(path) -> Tuple[List[str], List[str], np.ndarray]:
    ids, labels, rows = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 4:
                raise FormatError("expected 'review_id TAB label TAB p_1 .. p_C'", lineno, path)
            try:
                rows.append([float(p) for p in parts[2:]])
            except ValueError:
                raise FormatError("non-numeric probability", lineno, path) from None
            if parts[1] not in corpus.LABEL_INDEX:
                raise FormatError(f"unknown label {parts[1]!r}", lineno, path)
            ids.append(parts[0])
            labels.append(parts[1])
    if len({len(r) for r in rows}) > 1:
        raise FormatError("rows have different class counts", path=path)
    return ids, labels, np.array(rows)


def write_labels(path, ds: corpus.LabeledDataset):
    with open(path, "w", encoding="utf-8") as fh:
        for r in ds:
            fh.write(f"{r.id}\t{r.label}\n")


def read_labels(path) -> Tuple[List[str], List[str]]:
    ids, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or parts[1] not in corpus.LABEL_INDEX:
                raise FormatError("expected 'review_id TAB label'", lineno, path)
            ids.append(parts[0])
            labels.append(parts[1])
    return ids, labels


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- pipeline -----------------------------------------------------------------


@contextlib.contextmanager
def stage(name: str, timings: Optional[dict] = None):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except (WarvError, OSError, ValueError, KeyError) as e:
        raise StageError(name, e) from e
    finally:
        if timings is not None:
            timings[name] = time.perf_counter() - start


def load_tables(cfg: RunConfig):
    tables = []
    for i, e in enumerate(cfg["embeddings"]):
        fmt = e.get("format", "glove-text")
        table = embeddings.load_embedding_file(cfg.path(e["path"]), fmt, e.get("name"))
        if e.get("dim") is not None and table.dim != e["dim"]:
            raise embeddings.DimMismatch(
                f"embedding {e['path']} has dim {table.dim}, config says {e['dim']}")
        tables.append(table)
    return tables[0], (tables[1] if len(tables) > 1 else None)


def load_stopword_set(cfg: RunConfig):
    sw = cfg["stopwords"]
    if sw is False:
        return frozenset()
    return corpus.load_stopwords(cfg.path(sw) if sw else None)


def load_splits(cfg: RunConfig):
    data = cfg["data"]
    sw = load_stopword_set(cfg)
    primary = corpus.load_reviews(data["train"]["kind"], cfg.path(data["train"]["path"]), sw,
                                  data["class_set"])
    split = data["split"]
    train_ds, val_ds, test_ds = corpus.split_dataset(primary, split["fractions"], split["seed"])
    if data["test"] is not None:
        test_ds = corpus.load_reviews(data["test"]["kind"], cfg.path(data["test"]["path"]), sw,
                                      primary.class_set)
    return {"train": train_ds, "val": val_ds, "test": test_ds}


@dataclass
class Featurizer:
    """Everything needed to turn tokens into model inputs for one run."""
    builder: FeatureBuilder
    kind: str
    max_len: Optional[int] = None

    def __call__(self, ds) -> Tuple[np.ndarray, np.ndarray]:
        tokens = [r.tokens for r in ds]
        if self.kind == "ffnn":
            return self.builder.vectors(tokens)
        return self.builder.matrices(tokens, self.max_len)


def make_featurizer(cfg: RunConfig, t1, t2, word_stats: stats.WordStats, rank=None,
                    train_ds=None, max_len=None) -> Featurizer:
    w = cfg["weighting"]
    weights = None
    if w["scheme"] != "uniform":
        weights = stats.weight_table(word_stats, w["scheme"], w["alpha"])
    vocab_filter = None
    n = cfg["filter"]["n"]
    if n:
        if rank is None:
            rank = stats.rank_words(word_stats, cfg["filter"]["population_stddev"])
        vocab_filter = stats.select_top_n(rank, n)
    m = cfg["model"]
    builder = FeatureBuilder(t1, t2, weights, vocab_filter, w["weighted_mean"], m["matrix_weights"])
    if m["kind"] == "cnn" and max_len is None:
        max_len = m["max_len"] or builder.max_len(r.tokens for r in train_ds)
        if max_len < m["window"]:
            logger.info("padding max_len %d up to the window size %d", max_len, m["window"])
            max_len = m["window"]
    return Featurizer(builder, m["kind"], max_len)


def architecture_for(cfg: RunConfig, d: int, n_classes: int, max_len: Optional[int]) -> ArchitectureSpec:
    m = cfg["model"]
    return ArchitectureSpec(kind=m["kind"], input_dim=d, hidden=list(m["hidden"]), max_len=max_len,
                            window=m["window"], n_filters=m["n_filters"], n_classes=n_classes,
                            printed_init_bound=m["printed_init_bound"])


def run_pipeline(cfg: RunConfig) -> EvalReport:
    """stats -> weights -> filter -> features -> train -> evaluate, writing
    every artifact into ``cfg.output_dir``."""
    timings = {}
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with stage("embeddings", timings):
        t1, t2 = load_tables(cfg)
    with stage("corpus", timings):
        splits = load_splits(cfg)
        train_ds = splits["train"]
        if len(train_ds) == 0:
            raise EmptyDataset("training split is empty")
        n_classes = train_ds.n_classes
        for name, ds in splits.items():
            write_labels(out / f"split_{name}.tsv", ds)
    with stage("stats", timings):
        word_stats = stats.compute_word_stats(train_ds)
        rank = stats.rank_words(word_stats, cfg["filter"]["population_stddev"])
        word_stats.to_tsv(out / "stats.tsv")
        rank.to_tsv(out / "rank.tsv")
    with stage("features", timings):
        feat = make_featurizer(cfg, t1, t2, word_stats, rank, train_ds)
        X_train, mask = feat(train_ds)
        y_train = train_ds.labels
        if not mask.any():
            raise EmptyDataset("no training review has a usable token")
        X_val, vmask = feat(splits["val"])
    with stage("train", timings):
        arch = architecture_for(cfg, feat.builder.dim, n_classes, feat.max_len)
        model = arch.build(cfg["model"]["seed"])
        tcfg = TrainConfig(**cfg["train"])
        y_val = splits["val"].labels
        model, history = train(model, X_train[mask], y_train[mask], tcfg,
                               X_val[vmask] if len(X_val) else None,
                               y_val[vmask] if len(X_val) else None)
        save_model(model, out / "model.json", extra={"max_len": feat.max_len, "config_hash": cfg.hash})
        write_json(out / "history.json", history)
    with stage("evaluate", timings):
        inputs = {"train": X_train, "val": X_val}
        for name, ds in splits.items():
            X = inputs[name] if name in inputs else feat(ds)[0]
            probs = model.predict_proba(X) if len(ds) else np.zeros((0, n_classes))
            fname = "predictions.tsv" if name == "test" else f"predictions_{name}.tsv"
            write_predictions(out / fname, ds.ids, probs)
            if name == "test":
                test_probs = probs
        test_ds = splits["test"]
        if len(test_ds) == 0:
            raise EmptyDataset("test split is empty")
        report = evaluate(np.argmax(test_probs, axis=1), test_ds.labels, n_classes)
        report.metadata = {
            "config_hash": cfg.hash,
            "seed": cfg["train"]["seed"],
            "model": arch.to_dict(),
            "weighting": cfg["weighting"]["scheme"],
            "filter_n": cfg["filter"]["n"],
            "split_sizes": {k: len(v) for k, v in splits.items()},
            "empty_train_reviews": int((~mask).sum()),
            "final_train_accuracy": history[-1]["accuracy"],
        }
        write_json(out / "config.json", cfg.values)
        write_json(out / "run.json", {"base_dir": str(cfg.base_dir.resolve()), "config_hash": cfg.hash})
        write_json(out / "report.json", report.to_dict())
    report.timings = timings
    logger.info("timings: %s", {k: round(v, 3) for k, v in timings.items()})
    return report


# -- reuse of a finished run ----------------------------------------------------


@dataclass
class TrainedRun:
    directory: Path
    config: RunConfig
    model: object
    featurizer: Featurizer


def load_run(run_dir, t1=None, t2=None) -> TrainedRun:
    """Reload a finished run; relative config paths resolve against the
    directory of the config it was trained from."""
    run_dir = Path(run_dir)
    doc = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
    meta = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    cfg = RunConfig(doc, Path(meta["base_dir"]))
    cfg.validate(check_paths=False)
    if t1 is None:
        t1, t2 = load_tables(cfg)
    model, extra = load_model(run_dir / "model.json")
    word_stats = stats.WordStats.from_tsv(run_dir / "stats.tsv")
    feat = make_featurizer(cfg, t1, t2, word_stats, max_len=extra.get("max_len"))
    return TrainedRun(run_dir, cfg, model, feat)


def predict_dataset(run: TrainedRun, ds: corpus.LabeledDataset) -> np.ndarray:
    X, _ = run.featurizer(ds)
    return run.model.predict_proba(X) if len(ds) else np.zeros((0, run.model.n_classes))


# -- ensembles ----------------------------------------------------------------


DEFAULT_ENSEMBLE = {
    "members": [],
    "combiner": "both",
    "step": 0.1,
    "stacker": {"seed": 0, "epochs": 200, "batch_size": 32, "source": "validation"},
    "output_dir": "ensemble",
}


def _member_split(run_dir: Path, name: str):
    ids, labels = read_labels(run_dir / f"split_{name}.tsv")
    fname = "predictions.tsv" if name == "test" else f"predictions_{name}.tsv"
    pids, _, probs = read_predictions(run_dir / fname)
    if pids != ids:
        raise FormatError(f"{run_dir / fname} does not match split_{name}.tsv")
    return ids, labels, probs


def run_ensemble(defn: dict, base_dir=None) -> dict:
    """Combine finished runs listed in ``defn['members']``.

    Members must have been trained on identical splits. Reads each member's
    split label files and prediction files, never the models themselves.
    """
    defn = _merge(DEFAULT_ENSEMBLE, defn)
    base = Path(base_dir) if base_dir else Path.cwd()
    members = [Path(p) if Path(p).is_absolute() else base / p for p in defn["members"]]
    if len(members) < 2:
        raise ValidationError("an ensemble needs at least two members")
    if defn["combiner"] not in ("interpolate", "stack", "both"):
        raise ValidationError(f"unknown combiner {defn['combiner']!r}")
    splits = {}
    for name in ("train", "val", "test"):
        per = [_member_split(m, name) for m in members]
        ids, labels = per[0][0], per[0][1]
        for m, (i, l, _) in zip(members, per):
            if i != ids or l != labels:
                raise ValidationError(f"member {m} was trained on a different {name} split")
        probs = [ensemble.expand_binary(p) if len(p) else p for _, _, p in per]
        splits[name] = (ids, corpus_labels(labels), probs)

    test_ids, y_test, test_probs = splits["test"]
    if len(y_test) == 0:
        raise EmptyDataset("members have an empty test split")
    n_classes = test_probs[0].shape[1]
    member_acc = [float(np.mean(np.argmax(p, axis=1) == y_test)) for p in test_probs]
    report = {"members": [str(m) for m in defn["members"]], "member_test_accuracy": member_acc}
    out = base / defn["output_dir"]
    out.mkdir(parents=True, exist_ok=True)

    if defn["combiner"] in ("interpolate", "both"):
        _, y_val, val_probs = splits["val"]
        found = ensemble.grid_search_weights(np.stack(val_probs) if len(y_val) else
                                             np.zeros((len(members), 0, n_classes)), y_val, defn["step"])
        scores = ensemble.interpolate_log_probs(np.stack(test_probs), found.weights)
        pred = np.argmax(scores, axis=1)
        write_predictions(out / "interpolate_predictions.tsv", test_ids, _softmax_rows(scores))
        report["interpolate"] = {"weights": list(found.weights), "step": found.step,
                                 "val_accuracy": found.accuracy,
                                 "test_accuracy": float(np.mean(pred == y_test))}

    if defn["combiner"] in ("stack", "both"):
        sc = defn["stacker"]
        ensemble.stacker_source(sc["source"], splits["train"][1], splits["val"][1])
        source = "val" if sc["source"] == "validation" else "train"
        _, y_src, src_probs = splits[source]
        X_src = ensemble.stacking_features(src_probs)
        stacker, history = ensemble.train_stacker(X_src, y_src, seed=sc["seed"], epochs=sc["epochs"],
                                                  batch_size=sc["batch_size"], n_classes=n_classes)
        out_probs = stacker.predict_proba(ensemble.stacking_features(test_probs))
        pred = np.argmax(out_probs, axis=1)
        save_model(stacker, out / "stacker.json", extra={"source": sc["source"]})
        write_predictions(out / "stack_predictions.tsv", test_ids, out_probs)
        report["stack"] = {"source": sc["source"], "seed": sc["seed"],
                           "layer_shapes": [[l.n_in, l.n_out] for l in stacker.layers if hasattr(l, "n_in")],
                           "train_accuracy": history[-1]["accuracy"],
                           "test_accuracy": float(np.mean(pred == y_test))}
    write_json(out / "ensemble_report.json", report)
    return report


def corpus_labels(labels: Sequence[str]) -> np.ndarray:
    return np.array([corpus.LABEL_INDEX[l] for l in labels], dtype=np.int64)


def _softmax_rows(scores):
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
