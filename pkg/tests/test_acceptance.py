"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the pytest terminal
summary (and printed, visible with ``-s``).
"""
import hashlib
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, write_config
from warv import pipeline
from warv.embeddings import EmbeddingTable
from warv.ensemble import build_stacker, grid_search_weights
from warv.features import build_review_vector
from warv.gradcheck import run_suite
from warv.nn import Dense
from warv.stats import WordCount, WordStats, class_spread, rank_words, word_weight


def record(n, title, ok, detail):
    line = f"[{n}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def digests(directory: Path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def synthetic_runs(synth_dir):
    """ARV, WARV and CNN runs on the 500-review synthetic corpus."""
    d, base = synth_dir
    runs = {}
    variants = {
        "acc-arv": {"weighting": {"scheme": "uniform"}},
        "acc-warv": {"weighting": {"scheme": "ratio"}},
        "acc-cnn": {"weighting": {"scheme": "uniform"}, "model": {"kind": "cnn", "window": 3}},
    }
    for name, upd in variants.items():
        cfg = pipeline.RunConfig.load(write_config(d, dict(base, **upd), name))
        start = time.perf_counter()
        report = pipeline.run_pipeline(cfg)
        runs[name] = (cfg, report, time.perf_counter() - start)
    return d, runs


def test_1_gradient_suite():
    start = time.perf_counter()
    cases = run_suite(n_ffnn=20, n_cnn=10, seed=0, h=1e-5)
    elapsed = time.perf_counter() - start
    worst = max(c.result.max_error for c in cases)
    skipped = sum(c.result.n_skipped for c in cases)
    checked = sum(c.result.n_checked for c in cases)
    n_ffnn = sum(c.name.startswith("ffnn") for c in cases)
    ok = worst < 1e-4 and elapsed < 30 and n_ffnn == 20 and len(cases) == 30 and skipped < 0.01 * checked
    record(1, "gradient suite (20 FFNN + 10 CNN, tol 1e-4, < 30 s)", ok,
           f"max rel err {worst:.2e} over {checked} coords ({skipped} kink skips), {elapsed:.1f} s")


def test_2_weighting_invariants():
    rng = np.random.default_rng(2)
    triples = rng.integers(0, 10_000, size=(1000, 3))
    triples[::10, 1] = triples[::10, 0]          # some equal pos/neg pairs
    triples[::25] = triples[::25, :1]            # some all-equal triples
    worst_recip, failures = 0.0, 0
    for p, n, u in triples.tolist():
        s = WordStats({"w": WordCount(p, n, u)})
        sw = s.swapped()
        r, r_sw = word_weight("w", s, "ratio", 1.0), word_weight("w", sw, "ratio", 1.0)
        worst_recip = max(worst_recip, abs(r * r_sw - 1.0))
        m, m_sw = word_weight("w", s, "max-ratio", 1.0), word_weight("w", sw, "max-ratio", 1.0)
        failures += int(abs(m - m_sw) > 1e-12 or m < 1.0)
        if p + n + u == 0:
            continue
        norm = class_spread(p, n, u)[2]
        k = int(rng.integers(2, 1000))
        failures += int(abs(class_spread(k * p, k * n, k * u)[2] - norm) > 1e-12)
        failures += int((norm == 0.0) != (p == n == u))
    ok = worst_recip <= 1e-12 and failures == 0
    record(2, "weighting invariants on 1000 triples (1e-12)", ok,
           f"max |ratio*swapped - 1| {worst_recip:.1e}, {failures} other violations")


def _brute_spread(c):
    c = np.array(c, dtype=np.float64)
    mean = c.mean()
    stddev = c.std() * math.sqrt(3)         # population std rescaled: no 1/3 under the root
    return mean, stddev, stddev / mean


def test_3_filter_oracle():
    rng = np.random.default_rng(3)
    triples = rng.integers(0, 1000, size=(1000, 3))
    triples[triples.sum(1) == 0] = 1
    worst = 0.0
    for t in triples.tolist():
        got, want = class_spread(*t), _brute_spread(t)
        worst = max(worst, abs(got[0] - want[0]), abs(got[1] - want[1]) / max(want[1], 1.0),
                    abs(got[2] - want[2]))
    stats = WordStats({f"w{i}": WordCount(*t) for i, t in enumerate(triples[:300].tolist())})
    scaled = WordStats({w: WordCount(*(k * x for x in c)) for (w, c), k in
                        zip(stats.counts.items(), rng.integers(1, 50, len(stats)).tolist())})
    stable = rank_words(stats).words == rank_words(scaled).words
    record(3, "filter statistics vs brute force (1e-12), ranking scale-stable", worst <= 1e-12 and stable,
           f"max deviation {worst:.1e}, ranking stable: {stable}")


def _brute_review_vector(tokens, tables, weights):
    dim = sum(t.dim for t in tables)
    total, n = [0.0] * dim, 0
    for tok in tokens:
        blocks, found = [], False
        for t in tables:
            if tok in t.words:
                v = [float(x) for x in t.matrix[t.words.index(tok)]]
                norm = math.sqrt(sum(x * x for x in v))
                blocks += [x / norm for x in v]
                found = True
            else:
                blocks += [0.0] * t.dim
        if not found:
            continue
        a = weights.get(tok, 1.0)
        total = [acc + a * x for acc, x in zip(total, blocks)]
        n += 1
    return [x / n for x in total]


def test_4_review_vector_oracle():
    rng = np.random.default_rng(4)
    vocab = [f"t{i}" for i in range(40)]
    t1 = EmbeddingTable("a", 5, tuple(vocab[:30]), rng.normal(size=(30, 5)))
    t2 = EmbeddingTable("b", 3, tuple(vocab[10:]), rng.normal(size=(30, 3)))
    weights = {w: float(rng.uniform(0.2, 4.0)) for w in vocab}
    worst_w, worst_u = 0.0, 0.0
    for _ in range(200):
        toks = list(rng.choice(vocab + ["oov1", "oov2"], size=int(rng.integers(1, 25))))
        if not any(t in vocab for t in toks):
            toks.append(vocab[0])
        got = build_review_vector(toks, t1, t2, weights).values
        worst_w = max(worst_w, np.max(np.abs(got - _brute_review_vector(toks, (t1, t2), weights))))
        plain = build_review_vector(toks, t1, t2).values
        worst_u = max(worst_u, np.max(np.abs(plain - _brute_review_vector(toks, (t1, t2), {}))))
    ok = worst_w <= 1e-12 and worst_u <= 1e-12
    record(4, "review vector vs brute force on 200 token lists (1e-12)", ok,
           f"weighted {worst_w:.1e}, uniform {worst_u:.1e}")


def test_5_end_to_end_synthetic(synthetic_runs):
    _, runs = synthetic_runs
    cfg, arv, t_arv = runs["acc-arv"]
    _, warv, _ = runs["acc-warv"]
    epochs = cfg["train"]["epochs"]
    ok = arv.accuracy >= 0.95 and epochs <= 50 and t_arv < 60 and abs(warv.accuracy - arv.accuracy) <= 0.05
    record(5, "synthetic FFNN-ARV >= 95% within 50 epochs / 60 s; WARV within 5 points", ok,
           f"ARV {arv.accuracy:.3f} ({epochs} epochs, {t_arv:.1f} s), WARV {warv.accuracy:.3f}")


def test_6_ensemble1_dominance():
    rng = np.random.default_rng(6)
    violations = 0
    for _ in range(50):
        M, C, N = int(rng.integers(2, 4)), int(rng.integers(2, 4)), int(rng.integers(5, 60))
        labels = rng.integers(0, C, N)
        probs = rng.dirichlet(np.ones(C) * rng.uniform(0.3, 3), size=(M, N))
        # make members informative to a random degree
        for m in range(M):
            hit = rng.random(N) < rng.uniform(0.2, 0.9)
            probs[m, hit, labels[hit]] += rng.uniform(0, 1)
            probs[m] /= probs[m].sum(axis=1, keepdims=True)
        found = grid_search_weights(probs, labels, 0.1)
        members = [np.mean(np.argmax(p, 1) == labels) for p in probs]
        violations += int(found.accuracy < max(members))
    record(6, "grid-searched interpolation >= every member on 50 scenarios", violations == 0,
           f"{violations} violations")


def test_7_ensemble2(synthetic_runs):
    d, runs = synthetic_runs
    shapes_ok = all(
        [(l.n_in, l.n_out) for l in build_stacker(M * C, C).layers if isinstance(l, Dense)]
        == [(M * C, M * C)] * 3 + [(M * C, C)] for M in (2, 3) for C in (2, 3))
    defn = {"members": ["run-acc-arv", "run-acc-warv", "run-acc-cnn"], "combiner": "stack",
            "output_dir": "acc-ens"}
    rep = pipeline.run_ensemble(defn, d)
    best = max(rep["member_test_accuracy"])
    stacked = rep["stack"]["test_accuracy"]
    ok = shapes_ok and rep["stack"]["layer_shapes"] == [[6, 6]] * 3 + [[6, 2]] and stacked >= best - 0.01
    record(7, "stacker shapes (M*C)^3 -> C; stacked >= best member - 1 point", ok,
           f"stacked {stacked:.3f}, members {rep['member_test_accuracy']}")


def test_8_determinism(synthetic_runs):
    d, runs = synthetic_runs
    mismatched = []
    for name, (cfg, _, _) in runs.items():
        before = digests(cfg.output_dir)
        pipeline.run_pipeline(cfg)
        if digests(cfg.output_dir) != before:
            mismatched.append(name)
    defn = {"members": ["run-acc-arv", "run-acc-warv", "run-acc-cnn"], "output_dir": "acc-ens-det"}
    pipeline.run_ensemble(defn, d)
    first = digests(d / "acc-ens-det")
    pipeline.run_ensemble(defn, d)
    if digests(d / "acc-ens-det") != first:
        mismatched.append("ensemble")
    record(8, "reruns produce hash-identical artifacts", not mismatched,
           f"{len(runs) + 1} runs compared, mismatched: {mismatched or 'none'}")


@pytest.mark.skipif(not os.environ.get("WARV_IMDB_CONFIG"),
                    reason="optional full-IMDB run; set WARV_IMDB_CONFIG to a run config")
def test_9_optional_imdb():
    cfg = pipeline.RunConfig.load(os.environ["WARV_IMDB_CONFIG"])
    report = pipeline.run_pipeline(cfg)
    record(9, "optional IMDB FFNN-WARV >= 85% (non-gating)", report.accuracy >= 0.85,
           f"accuracy {report.accuracy:.4f} on {report.n} reviews")
