"""Labeled review datasets: tokenization, loading and deterministic splits."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BadFractions, FormatError, ValidationError

LABELS = ("pos", "neg", "neu")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

_TOKEN = re.compile(r"\w+(?:'\w+)*")
_HTML_BREAK = re.compile(r"<br\s*/?>", re.IGNORECASE)


def load_stopwords(path=None) -> FrozenSet[str]:
    """Read a one-token-per-line stop-word file; ``None`` loads the bundled list."""
    if path is None:
        text = resources.files("warv").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def tokenize(text: str, stopwords: Iterable[str] = ()) -> List[str]:
    """Lowercase ``text`` and split it into word tokens.

    Runs of punctuation and whitespace separate tokens; apostrophes inside a
    word are kept ("don't"). Stop words are dropped after lowercasing.
    """
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [t for t in _TOKEN.findall(text.lower()) if t.replace("_", "") and t not in stop]


@dataclass(frozen=True)
class LabeledReview:
    id: str
    tokens: Tuple[str, ...]
    label: str

    def __post_init__(self):
        if self.label not in LABEL_INDEX:
            raise ValidationError(f"unknown label {self.label!r}")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def label_index(self) -> int:
        return LABEL_INDEX[self.label]


@dataclass(frozen=True)
class LabeledDataset:
    reviews: Tuple[LabeledReview, ...]
    class_set: str = field(default="")

    def __post_init__(self):
        reviews = tuple(self.reviews)
        object.__setattr__(self, "reviews", reviews)
        ids = [r.id for r in reviews]
        if len(set(ids)) != len(ids):
            raise ValidationError("review ids must be unique within a dataset")
        has_neu = any(r.label == "neu" for r in reviews)
        class_set = self.class_set or ("ternary" if has_neu else "binary")
        if class_set not in ("binary", "ternary"):
            raise ValidationError(f"unknown class set {class_set!r}")
        if class_set == "binary" and has_neu:
            raise ValidationError("binary dataset contains neutral reviews")
        object.__setattr__(self, "class_set", class_set)

    def __len__(self):
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)

    @property
    def n_classes(self) -> int:
        return 2 if self.class_set == "binary" else 3

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label_index for r in self.reviews], dtype=np.int64)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.reviews]

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset(tuple(self.reviews[i] for i in indices), self.class_set)


def read_jsonl(lines: Iterable[str], stopwords=frozenset(), class_set: str = "",
               path=None) -> LabeledDataset:
    reviews = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"malformed JSON ({e.msg})", lineno, path) from None
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise FormatError("expected an object with a string 'text' field", lineno, path)
        label = obj.get("label")
        if label not in LABEL_INDEX:
            raise FormatError(f"missing or unknown label {label!r}", lineno, path)
        rid = str(obj.get("id", lineno))
        reviews.append(LabeledReview(rid, tokenize(obj["text"], stopwords), label))
    return LabeledDataset(tuple(reviews), class_set)


def load_reviews(kind: str, path, stopwords=None, class_set: str = "") -> LabeledDataset:
    """Load a labeled dataset.

    ``kind`` is ``"jsonl"`` (one ``{"text", "label"}`` object per line, id =
    line number unless an ``id`` field is given) or ``"imdb-dir"`` (a
    directory holding ``pos/`` and ``neg/`` folders of ``*.txt`` files, id =
    ``<label>/<filename>``). ``stopwords=None`` uses the bundled list.
    """
    path = Path(path)
    if stopwords is None:
        stopwords = load_stopwords()
    if kind == "jsonl":
        with open(path, encoding="utf-8") as fh:
            return read_jsonl(fh, stopwords, class_set, path)
    if kind == "imdb-dir":
        reviews = []
        for label in ("pos", "neg"):
            sub = path / label
            if not sub.is_dir():
                raise FileNotFoundError(f"missing directory {sub}")
            for f in sorted(sub.glob("*.txt")):
                text = _HTML_BREAK.sub(" ", f.read_text(encoding="utf-8"))
                reviews.append(LabeledReview(f"{label}/{f.name}", tokenize(text, stopwords), label))
        return LabeledDataset(tuple(reviews), class_set or "binary")
    raise ValidationError(f"unknown dataset kind {kind!r}")


def split_sizes(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    if len(fractions) != 3 or any(not f >= 0 for f in fractions):
        raise BadFractions(f"need three nonnegative fractions, got {fractions!r}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions sum to {sum(fractions)!r}, not 1")
    # the small slack keeps e.g. 0.29 * 100 from flooring to 28
    n_train = min(n, math.floor(fractions[0] * n + 1e-9))
    n_val = min(n - n_train, math.floor(fractions[1] * n + 1e-9))
    return n_train, n_val, n - n_train - n_val


def split_dataset(ds: LabeledDataset, fractions=(0.8, 0.1, 0.1), seed: int = 0
                  ) -> Tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Shuffle with ``seed`` and cut into train/validation/test parts.

    Train and validation sizes are floored; the test part takes the rest.
    """
    n_train, n_val, _ = split_sizes(len(ds), fractions)
    order = np.random.default_rng(seed).permutation(len(ds))
    return (ds.subset(order[:n_train]),
            ds.subset(order[n_train:n_train + n_val]),
            ds.subset(order[n_train + n_val:]))


def concat_datasets(parts: Sequence[LabeledDataset], class_set: Optional[str] = None) -> LabeledDataset:
    reviews = tuple(r for p in parts for r in p.reviews)
    return LabeledDataset(reviews, class_set or "")
