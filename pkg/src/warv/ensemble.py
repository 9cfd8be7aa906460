"""Combining trained classifiers.

Two combiners: weighted interpolation of per-class log probabilities with
weights found by grid search on validation data, and a stacking network
trained on the concatenated class probabilities of the members.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (EmptyDataset, EmptySplit, EmptyValidation, InconsistentClasses,
                     LengthMismatch, ValidationError)
from .nn import Dense, Network, ReLU, TrainConfig, train

LOG_CLAMP = 1e-12
SOURCES = ("validation", "training")


def interpolate_log_probs(model_probs, weights) -> np.ndarray:
    """Score ``sum_m weights[m] * log p[m, ..., c]``.

    ``model_probs`` has shape ``(M, C)`` for one review or ``(M, N, C)`` for
    a batch. Predictions are ``argmax`` of the scores (lowest class on ties).
    """
    probs = np.asarray(model_probs, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or len(w) != probs.shape[0]:
        raise LengthMismatch(f"{w.size} weights for {probs.shape[0]} models")
    logs = np.log(np.maximum(probs, LOG_CLAMP))
    return np.tensordot(w, logs, axes=1)


def grid_values(step: float) -> np.ndarray:
    k = round(1.0 / step) if step > 0 else 0
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ValidationError(f"grid step {step!r} does not divide 1 evenly")
    return np.arange(k + 1) / k


def weight_grid(n_models: int, step: float = 0.1):
    """Every weight vector on the grid except all zeros, in lexicographic order."""
    values = grid_values(step)
    for combo in itertools.product(values, repeat=n_models):
        if any(combo):
            yield combo


@dataclass(frozen=True)
class EnsembleWeights:
    weights: Tuple[float, ...]
    accuracy: float
    step: float


def grid_search_weights(model_probs, labels, step: float = 0.1) -> EnsembleWeights:
    """Exhaustive search for the interpolation weights with best accuracy.

    ``model_probs`` is ``(M, N, C)`` over N validation reviews. Ties keep the
    lexicographically smallest weight vector.
    """
    probs = np.asarray(model_probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 3:
        raise LengthMismatch("expected probabilities shaped (models, reviews, classes)")
    if probs.shape[1] == 0:
        raise EmptyValidation("no validation reviews")
    if probs.shape[1] != len(labels):
        raise LengthMismatch(f"{probs.shape[1]} reviews but {len(labels)} labels")
    logs = np.log(np.maximum(probs, LOG_CLAMP))
    best, best_acc = None, -1.0
    for combo in weight_grid(probs.shape[0], step):
        pred = np.argmax(np.tensordot(np.asarray(combo), logs, axes=1), axis=-1)
        acc = float(np.mean(pred == labels))
        if acc > best_acc:
            best, best_acc = combo, acc
    return EnsembleWeights(tuple(float(w) for w in best), best_acc, step)


def expand_binary(probs) -> np.ndarray:
    """Bring member outputs to ``(N, C)`` rows; a single P(pos) column becomes ``(p, 1 - p)``."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if p.shape[1] == 1:
        p = np.hstack([p, 1.0 - p])
    return p


def stacking_features(prob_blocks: Sequence) -> np.ndarray:
    """Concatenate per-model class probabilities into ``(N, M * C)``, in model order."""
    blocks = [expand_binary(b) for b in prob_blocks]
    if not blocks:
        raise ValidationError("no member probabilities")
    n_classes = {b.shape[1] for b in blocks}
    if len(n_classes) != 1:
        raise InconsistentClasses(f"members disagree on class count: {sorted(n_classes)}")
    if len({len(b) for b in blocks}) != 1:
        raise LengthMismatch("members scored different numbers of reviews")
    return np.hstack(blocks)


def build_stacking_features(models: Sequence[Network], inputs: Sequence) -> np.ndarray:
    """Stacking features from trained members; ``inputs[m]`` is what model m consumes."""
    if len(models) != len(inputs):
        raise LengthMismatch("one input array per model required")
    classes = {m.n_classes for m in models}
    if len(classes) != 1:
        raise InconsistentClasses(f"members disagree on class count: {sorted(classes)}")
    return stacking_features([m.predict_proba(x) for m, x in zip(models, inputs)])


def build_stacker(n_inputs: int, n_classes: int, seed=0) -> Network:
    """Three ReLU hidden layers as wide as the input, then one sigmoid unit per class."""
    layers = []
    for _ in range(3):
        layers += [Dense(n_inputs, n_inputs), ReLU()]
    layers.append(Dense(n_inputs, n_classes))
    arch = {"kind": "stacker", "input_dim": n_inputs, "n_classes": n_classes}
    return Network(layers, "sigmoid-multi", (n_inputs,), arch).init(seed)


def train_stacker(features, labels, seed: int = 0, epochs: int = 200, batch_size: int = 32,
                  n_classes: int = None, X_val=None, y_val=None):
    """Fit the stacking network; returns ``(model, history)``."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if len(X) == 0:
        raise EmptyDataset("no stacking examples")
    if n_classes is None:
        n_classes = max(2, int(y.max()) + 1)
    model = build_stacker(X.shape[1], n_classes, seed)
    cfg = TrainConfig(epochs=epochs, batch_size=batch_size, seed=seed)
    return train(model, X, y, cfg, X_val, y_val)


def stacker_source(policy: str, train_split, val_split):
    """Pick the split whose member probabilities feed the stacker."""
    if policy not in SOURCES:
        raise ValidationError(f"unknown stacker source {policy!r}")
    chosen = val_split if policy == "validation" else train_split
    if chosen is None or len(chosen) == 0:
        raise EmptySplit(f"the {policy} split is empty")
    return chosen
