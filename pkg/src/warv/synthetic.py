"""Planted-signal corpora for smoke tests and demos.

Words are split into positive, negative and neutral groups. Embedding
vectors get a shared class direction added (plus for positive words, minus
for negative), and reviews draw more words from their own group than from
the opposite one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .corpus import LabeledDataset, LabeledReview
from .embeddings import EmbeddingTable, write_embedding_file


@dataclass
class SyntheticCorpus:
    dataset: LabeledDataset
    texts: Tuple[str, ...]
    t1: EmbeddingTable
    t2: EmbeddingTable
    polarity: np.ndarray  # +1 / -1 / 0 per vocabulary word


def make_corpus(n_reviews: int = 500, vocab: int = 100, dim1: int = 16, dim2: int = 16,
                polar_fraction: float = 0.3, signal: float = 1.5, own_rate: float = 0.45,
                other_rate: float = 0.05, min_len: int = 15, max_len: int = 40,
                t2_missing: float = 0.1, ternary: bool = False, seed: int = 0) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    words = [f"w{i:03d}" for i in range(vocab)]
    n_polar = int(round(polar_fraction * vocab))
    polarity = np.zeros(vocab, dtype=int)
    order = rng.permutation(vocab)
    polarity[order[:n_polar]] = 1
    polarity[order[n_polar:2 * n_polar]] = -1

    def table(name, dim, keep):
        u = rng.normal(size=dim)
        u /= np.linalg.norm(u)
        m = rng.normal(size=(vocab, dim)) / np.sqrt(dim) + signal * polarity[:, None] * u
        idx = [i for i in range(vocab) if keep[i]]
        return EmbeddingTable(name, dim, tuple(words[i] for i in idx), m[idx])

    t1 = table("word2vec", dim1, np.ones(vocab, dtype=bool))
    t2 = table("glove", dim2, rng.random(vocab) >= t2_missing)

    groups = {1: np.flatnonzero(polarity == 1), -1: np.flatnonzero(polarity == -1),
              0: np.flatnonzero(polarity == 0)}
    labels = ["pos", "neg", "neu"] if ternary else ["pos", "neg"]
    reviews, texts = [], []
    for r in range(n_reviews):
        label = labels[r % len(labels)]
        sign = {"pos": 1, "neg": -1, "neu": 0}[label]
        length = int(rng.integers(min_len, max_len + 1))
        toks = []
        for _ in range(length):
            u = rng.random()
            if sign == 0:
                group = 1 if u < other_rate else (-1 if u < 2 * other_rate else 0)
            else:
                group = sign if u < own_rate else (-sign if u < own_rate + other_rate else 0)
            toks.append(words[int(rng.choice(groups[group]))])
        texts.append(" ".join(toks))
        reviews.append(LabeledReview(str(r + 1), tuple(toks), label))
    perm = rng.permutation(n_reviews)
    dataset = LabeledDataset(tuple(reviews[i] for i in perm), "ternary" if ternary else "binary")
    return SyntheticCorpus(dataset, tuple(texts[i] for i in perm), t1, t2, polarity)


def write_corpus(corpus: SyntheticCorpus, out_dir) -> dict:
    """Write ``reviews.jsonl``, ``word2vec.txt`` and ``glove.txt``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"reviews": out / "reviews.jsonl", "word2vec": out / "word2vec.txt",
             "glove": out / "glove.txt"}
    with open(paths["reviews"], "w", encoding="utf-8") as fh:
        for review, text in zip(corpus.dataset, corpus.texts):
            fh.write(json.dumps({"id": review.id, "text": text, "label": review.label}) + "\n")
    write_embedding_file(corpus.t1, paths["word2vec"], "word2vec-text")
    write_embedding_file(corpus.t2, paths["glove"], "glove-text")
    return paths
