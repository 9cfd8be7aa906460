import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from warv.corpus import LabeledDataset, LabeledReview
from warv.errors import EmptyDataset, EmptyStats
from warv.stats import (FilterRank, WordCount, WordStats, class_spread, compute_word_stats,
                        rank_words, select_top_n, word_weight)


def _ds(*items):
    return LabeledDataset(tuple(LabeledReview(str(i), tuple(text.split()), label)
                                for i, (label, text) in enumerate(items)))


def test_counts_example():
    s = compute_word_stats(_ds(("pos", "good food"), ("neg", "bad food")))
    assert s.f_p("good") == 1 and s.f_n("good") == 0
    assert s.f("food") == 2 and s.get("food").p_pos == 0.5
    assert s.get("absent") is None


def test_counts_multiplicity_neutral():
    s = compute_word_stats(_ds(("neu", "ok ok")))
    assert s.f_u("ok") == 2 and s.f("ok") == 2


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        compute_word_stats(LabeledDataset(()))


@given(st.lists(st.tuples(st.sampled_from(["pos", "neg", "neu"]),
                          st.lists(st.sampled_from("abcdefg"), max_size=12)), min_size=1, max_size=20))
def test_counts_total(items):
    ds = _ds(*[(label, " ".join(toks)) for label, toks in items])
    s = compute_word_stats(ds)
    assert s.total_tokens() == sum(len(r.tokens) for r in ds)
    for c in s.counts.values():
        assert c.total == c.pos + c.neg + c.neu
        assert 0 <= c.p_pos + c.p_neg <= 1


def test_weight_examples():
    s = WordStats({"w": WordCount(8, 2, 0), "v": WordCount(2, 8, 0)})
    assert word_weight("w", s, "uniform") == 1.0
    assert word_weight("w", s, "ratio", 1.0) == 3.0
    assert word_weight("v", s, "max-ratio", 1.0) == 3.0
    assert word_weight("unseen", s, "ratio") == 1.0


counts = st.integers(0, 10 ** 6)


@given(counts, counts, counts, st.floats(0.01, 10))
def test_label_swap(p, n, u, alpha):
    s = WordStats({"w": WordCount(p, n, u)})
    sw = s.swapped()
    r, r_sw = word_weight("w", s, "ratio", alpha), word_weight("w", sw, "ratio", alpha)
    assert abs(r * r_sw - 1.0) <= 1e-12
    m = word_weight("w", s, "max-ratio", alpha)
    assert m == word_weight("w", sw, "max-ratio", alpha)
    assert m >= 1.0


def test_spread_example():
    mean, sd, norm = class_spread(9, 0, 0)
    assert mean == 3.0
    assert sd == pytest.approx(7.3484692283495345, abs=1e-12)
    assert norm == pytest.approx(2.449489742783178, abs=1e-12)
    assert class_spread(10, 10, 10)[2] == 0.0
    assert class_spread(9, 0, 0)[2] == pytest.approx(class_spread(90, 0, 0)[2], abs=1e-12)


def test_population_variant():
    _, sd, _ = class_spread(9, 0, 0, population=True)
    assert sd == pytest.approx(math.sqrt(18), abs=1e-12)


def test_rank_order_and_ties():
    s = WordStats({"even": WordCount(10, 10, 10), "skew": WordCount(9, 0, 0),
                   "b": WordCount(3, 1, 0), "a": WordCount(30, 10, 0)})
    rank = rank_words(s)
    assert rank.words == ["skew", "a", "b", "even"]
    assert rank.entries[-1].normalized == 0.0
    assert select_top_n(rank, 3) == {"skew", "a", "b"}
    assert select_top_n(rank, 2) == {"skew", "a"}
    assert select_top_n(rank, 100) == set(rank.words)


def test_rank_empty():
    with pytest.raises(EmptyStats):
        rank_words(WordStats({}))


def test_tsv_roundtrip(tmp_path):
    s = WordStats({"x": WordCount(1, 2, 3), "y": WordCount(0, 4, 0)})
    s.to_tsv(tmp_path / "s.tsv")
    assert WordStats.from_tsv(tmp_path / "s.tsv") == s
    rank = rank_words(s)
    rank.to_tsv(tmp_path / "r.tsv")
    back = FilterRank.from_tsv(tmp_path / "r.tsv")
    assert back.words == rank.words
    assert [e.normalized for e in back.entries] == [e.normalized for e in rank.entries]
