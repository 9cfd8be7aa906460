"""Pretrained word-vector tables: loading, normalization and concatenation.

Two plain-text formats are supported::

    glove-text      word v1 v2 ... vd           (no header)
    word2vec-text   vocab_count dim             (header line)
                    word v1 v2 ... vd

Values are always parsed as float64.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .errors import DimMismatch, FormatError, ValidationError, ZeroVector

logger = logging.getLogger(__name__)

FORMATS = ("glove-text", "word2vec-text")
ZERO_NORM = 1e-12


@dataclass(frozen=True)
class EmbVector:
    values: np.ndarray
    normalized: bool = False

    def __len__(self):
        return len(self.values)


def normalize_vector(v) -> EmbVector:
    """Scale ``v`` to unit L2 norm.

    Raises :class:`ZeroVector` when the norm is below 1e-12.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-d vector")
    norm = np.linalg.norm(v)
    if not norm >= ZERO_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm!r}")
    return EmbVector(v / norm, normalized=True)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Immutable word -> vector map backed by a single float64 matrix.

    Rows with zero norm are kept in :attr:`matrix` but have no unit vector;
    :meth:`unit` returns ``None`` for them.
    """
    name: str
    dim: int
    words: tuple
    matrix: np.ndarray
    duplicates: int = 0
    _index: Dict[str, int] = field(init=False, repr=False)
    _unit: np.ndarray = field(init=False, repr=False)
    _has_unit: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise DimMismatch(f"matrix shape {matrix.shape} does not match dim {self.dim}")
        if matrix.shape[0] != len(self.words):
            raise ValidationError("one row per word required")
        index = {}
        for i, w in enumerate(self.words):
            if not w or any(ch.isspace() for ch in w):
                raise ValidationError(f"invalid vocabulary entry {w!r}")
            if w in index:
                raise ValidationError(f"duplicate vocabulary entry {w!r}")
            index[w] = i
        norms = np.linalg.norm(matrix, axis=1)
        has_unit = norms >= ZERO_NORM
        unit = np.zeros_like(matrix)
        unit[has_unit] = matrix[has_unit] / norms[has_unit, None]
        for arr in (matrix, unit, has_unit):
            arr.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_unit", unit)
        object.__setattr__(self, "_has_unit", has_unit)

    @classmethod
    def from_dict(cls, name: str, vectors: Dict[str, Sequence[float]]) -> "EmbeddingTable":
        words = list(vectors)
        if not words:
            raise ValidationError("empty embedding table")
        matrix = np.array([np.asarray(vectors[w], dtype=np.float64) for w in words])
        return cls(name, matrix.shape[1], tuple(words), matrix)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def __getitem__(self, word) -> np.ndarray:
        return self.matrix[self._index[word]]

    def get(self, word, default=None):
        i = self._index.get(word)
        return default if i is None else self.matrix[i]

    def unit(self, word) -> Optional[np.ndarray]:
        """Normalized vector for ``word`` or ``None`` if absent or zero."""
        i = self._index.get(word)
        if i is None or not self._has_unit[i]:
            return None
        return self._unit[i]

    @property
    def vectors(self) -> Dict[str, np.ndarray]:
        return {w: self.matrix[i] for w, i in self._index.items()}


def _parse_row(parts, lineno, path, dim):
    if len(parts) - 1 != dim:
        raise FormatError(f"expected {dim} values, found {len(parts) - 1}", lineno, path)
    try:
        return [float(x) for x in parts[1:]]
    except ValueError as e:
        raise FormatError(f"non-numeric field ({e})", lineno, path) from None


def read_embeddings(lines: Iterable[str], fmt: str, name: str = "embeddings",
                    path=None) -> EmbeddingTable:
    """Parse an embedding table from an iterable of text lines."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown embedding format {fmt!r}; expected one of {FORMATS}")
    words, rows = [], []
    seen = set()
    duplicates = 0
    dim = None
    declared_count = None
    lineno = 0
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if lineno == 1 and fmt == "word2vec-text":
            if len(parts) != 2:
                raise FormatError("expected header 'vocab_count dim'", lineno, path)
            try:
                declared_count, dim = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError("non-integer header", lineno, path) from None
            if dim < 1 or declared_count < 0:
                raise FormatError("header values out of range", lineno, path)
            continue
        if not parts:
            continue
        if dim is None:
            dim = len(parts) - 1
            if dim < 1:
                raise FormatError("row has no vector values", lineno, path)
        elif len(parts) - 1 != dim and fmt == "word2vec-text" and not rows:
            raise DimMismatch(f"header dim {dim} disagrees with row of {len(parts) - 1} values",
                              lineno, path)
        values = _parse_row(parts, lineno, path, dim)
        word = parts[0]
        if word in seen:
            duplicates += 1
            continue
        seen.add(word)
        words.append(word)
        rows.append(values)
    if not rows:
        raise FormatError("no vectors found", lineno or None, path)
    if declared_count is not None and declared_count != len(rows) + duplicates:
        logger.warning("%s: header declares %d words, found %d", path or name,
                       declared_count, len(rows) + duplicates)
    if duplicates:
        logger.warning("%s: %d duplicate words ignored (first occurrence kept)",
                       path or name, duplicates)
    return EmbeddingTable(name, dim, tuple(words), np.array(rows, dtype=np.float64), duplicates)


def load_embedding_file(path, fmt: str = "glove-text", name: Optional[str] = None) -> EmbeddingTable:
    path = Path(path)
    if name is None:
        name = path.stem
    try:
        with open(path, encoding="utf-8") as fh:
            return read_embeddings(fh, fmt, name=name, path=path)
    except UnicodeDecodeError as e:
        raise FormatError(f"not UTF-8 text ({e.reason})", path=path) from None


def write_embedding_file(table: EmbeddingTable, path, fmt: str = "glove-text"):
    """Write ``table`` in a text format; values use ``repr`` so they round-trip."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown embedding format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "word2vec-text":
            fh.write(f"{len(table)} {table.dim}\n")
        for w, row in zip(table.words, table.matrix):
            fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")


def concat_lookup(word: str, t1: EmbeddingTable, t2: Optional[EmbeddingTable] = None,
                  missing_policy: str = "skip") -> Optional[EmbVector]:
    """Concatenate the normalized vectors of ``word`` from ``t1`` and ``t2``.

    Each block is normalized on its own; a table lacking the word
    contributes a zero block. Under ``skip`` a word missing from every
    table yields ``None``; under ``zero-fill`` it yields an all-zero vector.
    ``t2`` may be omitted for single-table runs.
    """
    if missing_policy not in ("skip", "zero-fill"):
        raise ValidationError(f"unknown missing policy {missing_policy!r}")
    tables = (t1,) if t2 is None else (t1, t2)
    blocks = []
    found = 0
    for t in tables:
        u = t.unit(word)
        if u is None:
            blocks.append(np.zeros(t.dim))
        else:
            found += 1
            blocks.append(u)
    if not found and missing_policy == "skip":
        return None
    # the whole vector is unit-norm only when exactly one block resolved
    return EmbVector(np.concatenate(blocks), normalized=found == 1)
