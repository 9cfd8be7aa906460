"""Per-word class counts, polarity weights and the normalized-stddev filter."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

from .corpus import LabeledDataset
from .errors import EmptyDataset, EmptyStats, FormatError, ValidationError

SCHEMES = ("uniform", "ratio", "max-ratio")


class WordCount(NamedTuple):
    pos: int
    neg: int
    neu: int

    @property
    def total(self) -> int:
        return self.pos + self.neg + self.neu

    @property
    def p_pos(self) -> float:
        return self.pos / self.total

    @property
    def p_neg(self) -> float:
        return self.neg / self.total


@dataclass(frozen=True)
class WordStats:
    counts: Dict[str, WordCount]

    def __len__(self):
        return len(self.counts)

    def __contains__(self, word):
        return word in self.counts

    def get(self, word) -> Optional[WordCount]:
        return self.counts.get(word)

    def f_p(self, word) -> int:
        c = self.counts.get(word)
        return c.pos if c else 0

    def f_n(self, word) -> int:
        c = self.counts.get(word)
        return c.neg if c else 0

    def f_u(self, word) -> int:
        c = self.counts.get(word)
        return c.neu if c else 0

    def f(self, word) -> int:
        c = self.counts.get(word)
        return c.total if c else 0

    def total_tokens(self) -> int:
        return sum(c.total for c in self.counts.values())

    def swapped(self) -> "WordStats":
        """Stats of the same corpus with pos and neg labels exchanged."""
        return WordStats({w: WordCount(c.neg, c.pos, c.neu) for w, c in self.counts.items()})

    def to_tsv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for w in sorted(self.counts):
                c = self.counts[w]
                fh.write(f"{w}\t{c.pos}\t{c.neg}\t{c.neu}\n")

    @classmethod
    def from_tsv(cls, path) -> "WordStats":
        counts = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 4:
                    raise FormatError("expected 'word TAB f_p TAB f_n TAB f_u'", lineno, path)
                try:
                    c = WordCount(*(int(x) for x in parts[1:]))
                except ValueError:
                    raise FormatError("non-integer count", lineno, path) from None
                if min(c) < 0:
                    raise FormatError("negative count", lineno, path)
                counts[parts[0]] = c
        return cls(counts)


def count_tokens(ds: Iterable) -> Tuple[Counter, Counter, Counter]:
    pos, neg, neu = Counter(), Counter(), Counter()
    by_label = {"pos": pos, "neg": neg, "neu": neu}
    for review in ds:
        by_label[review.label].update(review.tokens)
    return pos, neg, neu


def compute_word_stats(ds: LabeledDataset) -> WordStats:
    """Count every token occurrence under the label of its review."""
    if len(ds) == 0:
        raise EmptyDataset("cannot compute word statistics of an empty dataset")
    pos, neg, neu = count_tokens(ds)
    words = set(pos) | set(neg) | set(neu)
    return WordStats({w: WordCount(pos[w], neg[w], neu[w]) for w in sorted(words)})


def word_weight(word: str, stats: WordStats, scheme: str = "uniform", alpha: float = 1.0) -> float:
    """Polarity weight of ``word``.

    ``ratio`` is the smoothed positive/negative probability ratio; since
    both probabilities share the denominator f(w) it reduces to
    (f_p + alpha) / (f_n + alpha). ``max-ratio`` is max(ratio, 1/ratio).
    Unknown words and the ``uniform`` scheme weigh 1.
    """
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown weighting scheme {scheme!r}")
    if scheme == "uniform":
        return 1.0
    if not alpha > 0:
        raise ValidationError("alpha must be positive for ratio weighting")
    c = stats.get(word)
    if c is None:
        return 1.0
    p, n = c.pos + alpha, c.neg + alpha
    if scheme == "ratio":
        return p / n
    # symmetric in (p, n) so a label swap gives a bitwise-identical weight
    return max(p / n, n / p)


def weight_table(stats: WordStats, scheme: str = "uniform", alpha: float = 1.0) -> Dict[str, float]:
    """Precompute :func:`word_weight` for every word in ``stats``."""
    return {w: word_weight(w, stats, scheme, alpha) for w in stats.counts}


class RankEntry(NamedTuple):
    word: str
    mean: float
    stddev: float
    normalized: float


@dataclass(frozen=True)
class FilterRank:
    """Words sorted by normalized stddev, descending; ties by word."""
    entries: Tuple[RankEntry, ...]

    def __len__(self):
        return len(self.entries)

    @property
    def words(self) -> List[str]:
        return [e.word for e in self.entries]

    def to_tsv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(f"{e.word}\t{e.normalized!r}\n")

    @classmethod
    def from_tsv(cls, path) -> "FilterRank":
        """Read ``word TAB normalized_stddev`` lines (mean and stddev become NaN)."""
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise FormatError("expected 'word TAB normalized_stddev'", lineno, path)
                try:
                    value = float(parts[1])
                except ValueError:
                    raise FormatError("non-numeric score", lineno, path) from None
                entries.append(RankEntry(parts[0], math.nan, math.nan, value))
        entries.sort(key=lambda e: (-e.normalized, e.word))
        return cls(tuple(entries))


def class_spread(c_p: int, c_n: int, c_u: int, population: bool = False) -> Tuple[float, float, float]:
    """(mean, stddev, stddev / mean) of the three class counts of one word.

    The default stddev has no 1/3 inside the root;
    ``population=True`` gives the population standard deviation.
    """
    mean = (c_p + c_n + c_u) / 3
    ss = (c_p - mean) ** 2 + (c_n - mean) ** 2 + (c_u - mean) ** 2
    if population:
        ss /= 3
    stddev = math.sqrt(ss)
    return mean, stddev, stddev / mean if mean else math.nan


def _exact_skew(c: WordCount) -> Fraction:
    # (stddev / mean)^2 * const as an exact rational: 3 * sum(c^2) - (sum c)^2 over (sum c)^2.
    # Sorting on it makes ties and count scaling exact, unlike the float ratio.
    s = c.total
    return Fraction(3 * (c.pos ** 2 + c.neg ** 2 + c.neu ** 2) - s * s, s * s)


def rank_words(stats: WordStats, population: bool = False) -> FilterRank:
    if len(stats) == 0:
        raise EmptyStats("no words to rank")
    scored = []
    for w, c in stats.counts.items():
        if c.total == 0:
            continue
        mean, sd, norm = class_spread(c.pos, c.neg, c.neu, population)
        scored.append((_exact_skew(c), RankEntry(w, mean, sd, norm)))
    scored.sort(key=lambda t: (-t[0], t[1].word))
    return FilterRank(tuple(e for _, e in scored))


def select_top_n(rank: FilterRank, n: int) -> Set[str]:
    """The first ``min(n, len(rank))`` words of the ranking."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    return {e.word for e in rank.entries[:n]}
