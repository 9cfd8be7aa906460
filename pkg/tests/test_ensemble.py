import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warv.ensemble import (build_stacker, build_stacking_features, expand_binary, grid_search_weights,
                           interpolate_log_probs, stacker_source, stacking_features, train_stacker,
                           weight_grid)
from warv.errors import EmptySplit, EmptyValidation, InconsistentClasses, LengthMismatch
from warv.models import build_ffnn
from warv.nn import Dense


def naive_grid_search(probs, labels, step):
    """Straight loops over the grid; keeps the first best in lexicographic order."""
    k = round(1 / step)
    grid = [i / k for i in range(k + 1)]
    best, best_acc = None, -1.0
    M, N, C = len(probs), len(probs[0]), len(probs[0][0])
    for w in itertools.product(grid, repeat=M):
        if all(x == 0 for x in w):
            continue
        correct = 0
        for n in range(N):
            scores = [sum(w[m] * np.log(max(probs[m][n][c], 1e-12)) for m in range(M))
                      for c in range(C)]
            correct += int(scores.index(max(scores)) == labels[n])
        acc = correct / N
        if acc > best_acc:
            best, best_acc = w, acc
    return best, best_acc


def test_interpolate_degenerate_weights():
    p = np.array([[0.2, 0.8], [0.9, 0.1]])
    s = interpolate_log_probs(p, (1, 0))
    np.testing.assert_allclose(s, np.log(p[0]))
    with pytest.raises(LengthMismatch):
        interpolate_log_probs(p, (1, 0, 0))


def test_identical_models_same_argmax():
    p = np.array([[0.3, 0.5, 0.2]] * 2)
    assert np.argmax(interpolate_log_probs(p, (0.3, 0.9))) == 1


@given(st.floats(0.01, 100))
def test_scale_invariance(c):
    rng = np.random.default_rng(0)
    p = rng.dirichlet(np.ones(3), size=(3, 20))
    w = np.array([0.2, 0.5, 0.3])
    assert np.array_equal(np.argmax(interpolate_log_probs(p, w), -1),
                          np.argmax(interpolate_log_probs(p, c * w), -1))


def test_grid_size():
    assert len(list(weight_grid(2, 0.5))) == 8
    assert len(list(weight_grid(3, 0.1))) == 11 ** 3 - 1


def test_grid_search_perfect_member():
    labels = np.array([0, 1, 0, 1])
    good = np.array([[0.9, 0.1], [0.2, 0.8], [0.7, 0.3], [0.4, 0.6]])
    coin = np.array([[0.9, 0.1], [0.9, 0.1], [0.1, 0.9], [0.1, 0.9]])
    found = grid_search_weights(np.stack([good, coin]), labels)
    assert found.accuracy == 1.0


def test_grid_search_empty():
    with pytest.raises(EmptyValidation):
        grid_search_weights(np.zeros((2, 0, 2)), np.zeros(0, dtype=int))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 3), st.sampled_from([0.25, 0.5]))
def test_grid_search_matches_naive(seed, M, step):
    rng = np.random.default_rng(seed)
    C, N = int(rng.integers(2, 4)), int(rng.integers(1, 12))
    probs = rng.dirichlet(np.ones(C), size=(M, N))
    labels = rng.integers(0, C, N)
    found = grid_search_weights(probs, labels, step)
    w, acc = naive_grid_search(probs.tolist(), labels.tolist(), step)
    assert found.weights == tuple(w) and found.accuracy == acc


def test_stacking_feature_layout():
    assert expand_binary(np.array([0.7])).tolist() == [[0.7, pytest.approx(0.3)]]
    f = stacking_features([np.array([0.7, 0.2]), np.array([[0.6, 0.4], [0.1, 0.9]])])
    assert f.shape == (2, 4)
    np.testing.assert_allclose(f[0], [0.7, 0.3, 0.6, 0.4])
    three = stacking_features([np.full((5, 3), 1 / 3)] * 3)
    assert three.shape == (5, 9)
    with pytest.raises(InconsistentClasses):
        stacking_features([np.full((2, 3), 1 / 3), np.full((2, 2), 0.5)])


def test_stacking_from_models():
    rng = np.random.default_rng(0)
    models = [build_ffnn(4, [], 2, seed=i) for i in range(2)]
    X = rng.normal(size=(6, 4))
    f = build_stacking_features(models, [X, X])
    assert f.shape == (6, 4)
    np.testing.assert_allclose(f[:, :2].sum(1), 1.0, atol=1e-6)
    with pytest.raises(InconsistentClasses):
        build_stacking_features([models[0], build_ffnn(4, [], 3)], [X, X])


@pytest.mark.parametrize("M,C", [(3, 3), (2, 2)])
def test_stacker_shapes(M, C):
    net = build_stacker(M * C, C)
    dims = [(l.n_in, l.n_out) for l in net.layers if isinstance(l, Dense)]
    assert dims == [(M * C, M * C)] * 3 + [(M * C, C)]
    assert net.output == "sigmoid-multi"


def test_stacker_deterministic_and_learns():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 80)
    p = np.clip(np.where(y == 0, 0.8, 0.3) + rng.normal(0, 0.1, 80), 0.01, 0.99)
    X = stacking_features([p, 1 - (1 - p) ** 2])
    a, _ = train_stacker(X, y, seed=4, epochs=100)
    b, hist = train_stacker(X, y, seed=4, epochs=100)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert pa.tobytes() == pb.tobytes()
    assert hist[-1]["accuracy"] > 0.8


def test_stacker_source():
    assert stacker_source("training", [1, 2], []) == [1, 2]
    with pytest.raises(EmptySplit):
        stacker_source("validation", [1, 2], [])
