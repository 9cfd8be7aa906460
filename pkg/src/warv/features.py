"""Review features: averaged (weighted) vectors and padded review matrices."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .embeddings import EmbeddingTable, concat_lookup
from .errors import EmptyDataset, EmptyReview, ValidationError

logger = logging.getLogger(__name__)

Weights = Union[Mapping[str, float], Callable[[str], float], None]


@dataclass(frozen=True)
class ReviewVector:
    values: np.ndarray
    n_used: int


@dataclass(frozen=True)
class ReviewMatrix:
    rows: np.ndarray
    n_real: int
    truncated: int = 0


def _weight_fn(weights: Weights) -> Callable[[str], float]:
    if weights is None:
        return lambda w: 1.0
    if callable(weights):
        return weights
    return lambda w: weights.get(w, 1.0)


def _tables(t1, t2) -> Tuple[EmbeddingTable, ...]:
    return (t1,) if t2 is None else (t1, t2)


def surviving_tokens(tokens: Iterable[str], t1: EmbeddingTable, t2: Optional[EmbeddingTable] = None,
                     vocab_filter: Optional[Set[str]] = None) -> List[str]:
    """Tokens that pass the filter and have a vector in at least one table."""
    tables = _tables(t1, t2)
    return [t for t in tokens
            if (vocab_filter is None or t in vocab_filter)
            and any(tb.unit(t) is not None for tb in tables)]


def build_review_vector(tokens: Sequence[str], t1: EmbeddingTable, t2: Optional[EmbeddingTable] = None,
                        weights: Weights = None, vocab_filter: Optional[Set[str]] = None,
                        weighted_mean: bool = False) -> ReviewVector:
    """Average of weighted, normalized word vectors.

    The sum of ``a_i * w_i`` runs over contributing tokens and is divided by
    their count N. With ``weighted_mean`` the divisor is the sum of weights.
    """
    weight = _weight_fn(weights)
    total = None
    n = 0
    wsum = 0.0
    for tok in tokens:
        if vocab_filter is not None and tok not in vocab_filter:
            continue
        vec = concat_lookup(tok, t1, t2, "skip")
        if vec is None:
            continue
        a = weight(tok)
        total = a * vec.values if total is None else total + a * vec.values
        n += 1
        wsum += a
    if n == 0:
        raise EmptyReview("no token of the review has an embedding")
    return ReviewVector(total / (wsum if weighted_mean else n), n)


def build_review_matrix(tokens: Sequence[str], t1: EmbeddingTable, t2: Optional[EmbeddingTable] = None,
                        weights: Weights = None, vocab_filter: Optional[Set[str]] = None,
                        max_len: int = 1, apply_weights: bool = True) -> ReviewMatrix:
    """One row per surviving token, zero rows as padding up to ``max_len``.

    A block whose table lacks the word is zero. Tokens past ``max_len`` are
    dropped and counted in :attr:`ReviewMatrix.truncated`.
    """
    if max_len < 1:
        raise ValidationError("max_len must be at least 1")
    weight = _weight_fn(weights)
    dim = sum(t.dim for t in _tables(t1, t2))
    kept = surviving_tokens(tokens, t1, t2, vocab_filter)
    rows = np.zeros((max_len, dim))
    n_real = min(len(kept), max_len)
    for i, tok in enumerate(kept[:n_real]):
        vec = concat_lookup(tok, t1, t2, "zero-fill").values
        rows[i] = weight(tok) * vec if apply_weights else vec
    truncated = len(kept) - n_real
    return ReviewMatrix(rows, n_real, truncated)


def dataset_max_len(token_lists: Iterable[Sequence[str]], t1: EmbeddingTable,
                    t2: Optional[EmbeddingTable] = None, vocab_filter: Optional[Set[str]] = None) -> int:
    """Longest surviving-token count over the given reviews."""
    longest = 0
    for tokens in token_lists:
        longest = max(longest, len(surviving_tokens(tokens, t1, t2, vocab_filter)))
    if longest == 0:
        raise EmptyDataset("every review is empty after filtering")
    return longest


@dataclass
class FeatureBuilder:
    """Bundles tables, weights and filter to featurize whole datasets."""
    t1: EmbeddingTable
    t2: Optional[EmbeddingTable] = None
    weights: Optional[Dict[str, float]] = None
    vocab_filter: Optional[Set[str]] = None
    weighted_mean: bool = False
    matrix_weights: bool = True
    truncated: int = field(default=0, init=False)

    @property
    def dim(self) -> int:
        return sum(t.dim for t in _tables(self.t1, self.t2))

    def vectors(self, token_lists: Iterable[Sequence[str]]) -> Tuple[np.ndarray, np.ndarray]:
        """Stack review vectors; empty reviews become zero rows.

        Returns ``(X, mask)`` where ``mask[i]`` is False for reviews with no
        contributing token (their row is all zeros).
        """
        out, mask = [], []
        for tokens in token_lists:
            try:
                out.append(build_review_vector(tokens, self.t1, self.t2, self.weights,
                                               self.vocab_filter, self.weighted_mean).values)
                mask.append(True)
            except EmptyReview:
                out.append(np.zeros(self.dim))
                mask.append(False)
        if not out:
            return np.zeros((0, self.dim)), np.zeros(0, dtype=bool)
        return np.array(out), np.array(mask)

    def max_len(self, token_lists: Iterable[Sequence[str]]) -> int:
        return dataset_max_len(token_lists, self.t1, self.t2, self.vocab_filter)

    def matrices(self, token_lists: Iterable[Sequence[str]], max_len: int) -> Tuple[np.ndarray, np.ndarray]:
        """Stack review matrices; ``mask[i]`` is False when review i has no rows."""
        out, mask = [], []
        truncated = 0
        for tokens in token_lists:
            m = build_review_matrix(tokens, self.t1, self.t2, self.weights, self.vocab_filter,
                                    max_len, self.matrix_weights)
            truncated += m.truncated
            out.append(m.rows)
            mask.append(m.n_real > 0)
        if truncated:
            logger.warning("%d tokens truncated beyond max_len=%d", truncated, max_len)
        self.truncated += truncated
        if not out:
            return np.zeros((0, max_len, self.dim)), np.zeros(0, dtype=bool)
        return np.stack(out), np.array(mask)


def write_feature_dump(path, ids: Sequence[str], X: np.ndarray):
    """TSV: review id then the feature values (first table block, then second)."""
    X = np.asarray(X)
    with open(path, "w", encoding="utf-8") as fh:
        for rid, row in zip(ids, X.reshape(len(X), -1)):
            fh.write(rid + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")
