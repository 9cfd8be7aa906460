import json

import numpy as np
import pytest

from warv.embeddings import EmbeddingTable
from warv.synthetic import make_corpus, write_corpus


@pytest.fixture
def tables():
    t1 = EmbeddingTable.from_dict("w2v", {"good": [3.0, 4.0, 0.0], "bad": [0.0, 0.0, 2.0],
                                          "food": [1.0, 1.0, 1.0]})
    t2 = EmbeddingTable.from_dict("glove", {"good": [0.0, 5.0], "food": [1.0, 0.0],
                                            "meh": [2.0, 2.0]})
    return t1, t2


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Synthetic corpus files plus a base config dict (relative paths)."""
    out = tmp_path_factory.mktemp("synth")
    corpus = make_corpus(seed=0)
    write_corpus(corpus, out)
    base = {
        "embeddings": [{"path": "word2vec.txt", "format": "word2vec-text", "dim": 16},
                       {"path": "glove.txt", "format": "glove-text", "dim": 16}],
        "data": {"train": {"kind": "jsonl", "path": "reviews.jsonl"},
                 "split": {"fractions": [0.6, 0.2, 0.2], "seed": 0}},
        "weighting": {"scheme": "uniform"},
    }
    return out, base


def write_config(directory, doc, name):
    path = directory / f"{name}.json"
    doc = dict(doc, output_dir=f"run-{name}")
    path.write_text(json.dumps(doc))
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
