import json

import pytest
from hypothesis import given, strategies as st

from warv.corpus import (LabeledDataset, LabeledReview, load_reviews, load_stopwords, split_dataset,
                         tokenize)
from warv.errors import BadFractions, FormatError, ValidationError


def test_tokenize_examples():
    assert tokenize("The food was great!", {"the", "was"}) == ["food", "great"]
    assert tokenize("") == []
    assert tokenize("Great GREAT") == ["great", "great"]


def test_tokenize_punctuation_and_contractions():
    assert tokenize("... don't -- stop!!! ?!") == ["don't", "stop"]
    assert tokenize("café, naïve") == ["café", "naïve"]


@given(st.text(), st.sets(st.sampled_from(["a", "the", "is", "b"])))
def test_tokenize_idempotent(text, stop):
    once = tokenize(text, stop)
    assert tokenize(" ".join(once), stop) == once
    assert not set(once) & stop


def test_bundled_stopwords():
    sw = load_stopwords()
    assert {"the", "and", "was"} <= sw
    assert "not" not in sw


def test_load_imdb_dir(tmp_path):
    for label, names in {"pos": ["1_9.txt", "2_8.txt"], "neg": ["3_2.txt"]}.items():
        (tmp_path / label).mkdir()
        for n in names:
            (tmp_path / label / n).write_text("A fine<br />film")
    ds = load_reviews("imdb-dir", tmp_path)
    assert len(ds) == 3
    assert [r.label for r in ds] == ["pos", "pos", "neg"]
    assert ds.reviews[0].tokens == ("fine", "film")
    assert ds.class_set == "binary"


def test_load_jsonl(tmp_path):
    p = tmp_path / "d.jsonl"
    rows = [{"text": "good", "label": "pos"}, {"text": "bad", "label": "neg"},
            {"text": "ok", "label": "neu"}]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    ds = load_reviews("jsonl", p)
    assert len(ds) == 3 and ds.ids == ["1", "2", "3"] and ds.n_classes == 3


@pytest.mark.parametrize("line", ['{"text": "x"}', '{"text": "x", "label": "great"}', "{nope"])
def test_jsonl_errors(tmp_path, line):
    p = tmp_path / "d.jsonl"
    p.write_text('{"text": "fine", "label": "pos"}\n' + line + "\n")
    with pytest.raises(FormatError) as e:
        load_reviews("jsonl", p)
    assert e.value.line == 2


def test_binary_dataset_rejects_neutral():
    with pytest.raises(ValidationError):
        LabeledDataset((LabeledReview("1", ("x",), "neu"),), "binary")


def _ds(n):
    return LabeledDataset(tuple(LabeledReview(str(i), ("w",), "pos" if i % 2 else "neg")
                                for i in range(n)))


def test_split_sizes_and_disjoint():
    train, val, test = split_dataset(_ds(10), (0.8, 0.0, 0.2), seed=7)
    assert (len(train), len(val), len(test)) == (8, 0, 2)
    assert not set(train.ids) & set(test.ids)


def test_split_bad_fractions():
    with pytest.raises(BadFractions):
        split_dataset(_ds(10), (0.5, 0.5, 0.5), seed=0)


def test_split_deterministic():
    a = split_dataset(_ds(30), (0.5, 0.3, 0.2), seed=3)
    b = split_dataset(_ds(30), (0.5, 0.3, 0.2), seed=3)
    assert [p.ids for p in a] == [p.ids for p in b]


@given(st.integers(0, 60), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2 ** 32 - 1))
def test_split_partition(n, a, b, seed):
    a, b = min(a, 1.0), min(b, 1.0 - a)
    parts = split_dataset(_ds(n), (a, b, max(0.0, 1.0 - a - b)), seed)
    ids = [i for p in parts for i in p.ids]
    assert sorted(ids) == sorted(_ds(n).ids)
    assert len(ids) == len(set(ids))
