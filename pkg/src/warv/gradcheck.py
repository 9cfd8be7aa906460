"""Randomized gradient checks over small feed-forward and convolutional models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .models import FIG2_FAMILY, build_cnn, build_ffnn
from .nn import GradCheckResult, Network, gradient_check


@dataclass
class GradCase:
    name: str
    result: GradCheckResult


def _jitter_biases(model: Network, rng):
    # nonzero biases keep zero-padded windows and zero inputs off the ReLU kink
    for layer in model.layers:
        if hasattr(layer, "b"):
            layer.b[...] = rng.uniform(-0.2, 0.2, size=layer.b.shape)


def random_ffnn_case(rng, d=None, batch=3):
    d = d or int(rng.choice([8, 20]))
    hidden = list(FIG2_FAMILY[int(rng.integers(len(FIG2_FAMILY)))])
    n_classes = int(rng.choice([2, 3]))
    model = build_ffnn(d, hidden, n_classes, seed=rng)
    _jitter_biases(model, rng)
    x = rng.normal(size=(batch, d))
    y = rng.integers(0, n_classes, size=batch)
    return f"ffnn d={d} hidden={hidden} classes={n_classes}", model, x, y


def random_cnn_case(rng, d=8, max_len=6, window=3, n_filters=4, batch=3):
    n_classes = int(rng.choice([2, 3]))
    model = build_cnn(d, max_len, window, n_filters, n_classes, seed=rng)
    _jitter_biases(model, rng)
    x = rng.normal(size=(batch, max_len, d))
    n_real = rng.integers(window, max_len + 1, size=batch)
    for i, n in enumerate(n_real):
        x[i, n:] = 0.0
    y = rng.integers(0, n_classes, size=batch)
    return f"cnn d={d} max_len={max_len} window={window} filters={n_filters} classes={n_classes}", model, x, y


def run_suite(n_ffnn: int = 20, n_cnn: int = 10, seed: int = 0, h: float = 1e-5) -> List[GradCase]:
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_ffnn):
        name, model, x, y = random_ffnn_case(rng, d=(8, 20)[i % 2])
        cases.append(GradCase(name, gradient_check(model, x, y, h)))
    for _ in range(n_cnn):
        name, model, x, y = random_cnn_case(rng)
        cases.append(GradCase(name, gradient_check(model, x, y, h)))
    return cases
