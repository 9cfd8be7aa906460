"""A small numpy neural-network engine.

Layers work on batches: dense layers take ``(B, n_in)``, the 1-d
convolution takes ``(B, L, d)`` review matrices and produces
``(B, L - window + 1, n_filters)`` scores, and max-over-time pooling reduces
those to ``(B, n_filters)``. A :class:`Network` ends with one of three
output heads:

``sigmoid-binary``  one sigmoid unit read as P(pos), binary cross-entropy
``softmax``         k-way softmax, categorical cross-entropy
``sigmoid-multi``   k independent sigmoid units on one-hot targets, binary
                    cross-entropy averaged over units (used by the stacker)

Class index 0 is always ``pos``, so a binary probability row is ``(p, 1 - p)``.
Everything runs in float64.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BadLabel, BadSpec, EmptyDataset, FormatError, ShapeMismatch, ValidationError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PROB_CLAMP = 1e-7
OUTPUTS = ("sigmoid-binary", "softmax", "sigmoid-multi")
LOSS_OF_OUTPUT = {"sigmoid-binary": "bce", "softmax": "cce", "sigmoid-multi": "bce"}


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def glorot_bound(n_in: int, n_out: int, printed: bool = False) -> float:
    # printed=True uses 6 / (n_in + n_out) without the square root
    if n_in < 1 or n_out < 1:
        raise BadSpec("fan-in and fan-out must be positive")
    return 6.0 / (n_in + n_out) if printed else float(np.sqrt(6.0 / (n_in + n_out)))


def glorot_init(n_in: int, n_out: int, seed=0, shape=None, printed: bool = False) -> np.ndarray:
    """Uniform samples in ``[-bound, bound]`` with bound ``sqrt(6 / (n_in + n_out))``.

    ``shape`` defaults to ``(n_out, n_in)``.
    """
    bound = glorot_bound(n_in, n_out, printed)
    if shape is None:
        shape = (n_out, n_in)
    return _rng(seed).uniform(-bound, bound, size=shape)


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# -- layers -------------------------------------------------------------------


class Dense:
    kind = "dense"
    in_ndim = 1

    def __init__(self, n_in: int, n_out: int, W=None, b=None):
        if n_in < 1 or n_out < 1:
            raise BadSpec("dense layer sizes must be positive")
        self.n_in, self.n_out = n_in, n_out
        self.W = np.zeros((n_out, n_in)) if W is None else np.array(W, dtype=np.float64)
        self.b = np.zeros(n_out) if b is None else np.array(b, dtype=np.float64)
        if self.W.shape != (n_out, n_in) or self.b.shape != (n_out,):
            raise ShapeMismatch(f"dense parameters {self.W.shape}/{self.b.shape} "
                                f"do not match {n_out}x{n_in}")

    @property
    def params(self):
        return [self.W, self.b]

    def spec(self):
        return {"kind": self.kind, "n_in": self.n_in, "n_out": self.n_out}

    def init(self, rng, printed=False):
        self.W[...] = glorot_init(self.n_in, self.n_out, rng, printed=printed)
        self.b[...] = 0.0

    def out_shape(self, shape):
        if shape != (self.n_in,):
            raise ShapeMismatch(f"dense layer expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def forward(self, x):
        return x @ self.W.T + self.b, x

    def backward(self, dz, x):
        return dz @ self.W, [dz.T @ x, dz.sum(axis=0)]


class Conv1D:
    """Filters spanning ``window`` consecutive rows and the full row width."""
    kind = "conv1d"
    in_ndim = 2

    def __init__(self, d: int, window: int, n_filters: int, W=None, b=None):
        if d < 1 or window < 1 or n_filters < 1:
            raise BadSpec("conv1d sizes must be positive")
        self.d, self.window, self.n_filters = d, window, n_filters
        shape = (n_filters, window, d)
        self.W = np.zeros(shape) if W is None else np.array(W, dtype=np.float64)
        self.b = np.zeros(n_filters) if b is None else np.array(b, dtype=np.float64)
        if self.W.shape != shape or self.b.shape != (n_filters,):
            raise ShapeMismatch(f"conv1d parameters {self.W.shape} do not match {shape}")

    @property
    def params(self):
        return [self.W, self.b]

    def spec(self):
        return {"kind": self.kind, "d": self.d, "window": self.window, "n_filters": self.n_filters}

    def init(self, rng, printed=False):
        # fan-in / fan-out as for a (window, d, n_filters) kernel
        fan_in, fan_out = self.window * self.d, self.window * self.n_filters
        self.W[...] = glorot_init(fan_in, fan_out, rng, shape=self.W.shape, printed=printed)
        self.b[...] = 0.0

    def out_shape(self, shape):
        if len(shape) != 2 or shape[1] != self.d:
            raise ShapeMismatch(f"conv1d expects (L, {self.d}), got {shape}")
        if shape[0] < self.window:
            raise ShapeMismatch(f"review length {shape[0]} shorter than window {self.window}")
        return (shape[0] - self.window + 1, self.n_filters)

    def _windows(self, x):
        # (B, P, d, window) -> (B, P, window * d), row-major over (window, d)
        win = sliding_window_view(x, self.window, axis=1)
        B, P = win.shape[:2]
        return win.transpose(0, 1, 3, 2).reshape(B, P, self.window * self.d)

    def forward(self, x):
        win = self._windows(x)
        z = win @ self.W.reshape(self.n_filters, -1).T + self.b
        return z, (x.shape, win)

    def backward(self, dz, cache):
        x_shape, win = cache
        flat_W = self.W.reshape(self.n_filters, -1)
        dW = np.einsum("bpf,bpk->fk", dz, win).reshape(self.W.shape)
        db = dz.sum(axis=(0, 1))
        dwin = (dz @ flat_W).reshape(dz.shape[0], dz.shape[1], self.window, self.d)
        dx = np.zeros(x_shape)
        P = dz.shape[1]
        for k in range(self.window):
            dx[:, k:k + P, :] += dwin[:, :, k, :]
        return dx, [dW, db]


class MaxOverTime:
    """Per-filter maximum over window positions; ties go to the lowest index."""
    kind = "max_over_time"
    params: list = []

    def spec(self):
        return {"kind": self.kind}

    def init(self, rng, printed=False):
        pass

    def out_shape(self, shape):
        if len(shape) != 2:
            raise ShapeMismatch(f"max_over_time expects (P, F), got {shape}")
        return (shape[1],)

    def forward(self, x):
        idx = np.argmax(x, axis=1)
        out = np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0, :]
        return out, (x.shape, idx)

    def backward(self, dout, cache):
        shape, idx = cache
        dx = np.zeros(shape)
        np.put_along_axis(dx, idx[:, None, :], dout[:, None, :], axis=1)
        return dx, []


class ReLU:
    kind = "activation"
    params: list = []

    def spec(self):
        return {"kind": self.kind, "activation": "relu"}

    def init(self, rng, printed=False):
        pass

    def out_shape(self, shape):
        return shape

    def forward(self, x):
        return relu(x), x

    def backward(self, dout, x):
        return dout * (x > 0), []


def layer_from_spec(spec: dict, params=None):
    kind = spec.get("kind")
    params = params or []
    if kind == "dense":
        return Dense(spec["n_in"], spec["n_out"], *params)
    if kind == "conv1d":
        return Conv1D(spec["d"], spec["window"], spec["n_filters"], *params)
    if kind == "max_over_time":
        return MaxOverTime()
    if kind == "activation":
        if spec.get("activation") != "relu":
            raise BadSpec(f"unsupported hidden activation {spec.get('activation')!r}")
        return ReLU()
    raise BadSpec(f"unknown layer kind {kind!r}")


# -- network ------------------------------------------------------------------


@dataclass
class ForwardCache:
    layer_caches: list
    logits: np.ndarray
    out: np.ndarray


class Network:
    """Ordered layers followed by an output head; see the module docstring."""

    def __init__(self, layers: Sequence, output: str, input_shape: Tuple[int, ...],
                 architecture: Optional[dict] = None):
        if output not in OUTPUTS:
            raise BadSpec(f"unknown output kind {output!r}")
        self.layers = list(layers)
        self.output = output
        self.input_shape = tuple(input_shape)
        self.architecture = dict(architecture or {})
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.out_shape(shape)
        if len(shape) != 1:
            raise ShapeMismatch(f"network must end in a vector, got shape {shape}")
        self.n_out = shape[0]
        if output == "sigmoid-binary" and self.n_out != 1:
            raise BadSpec("sigmoid-binary output needs exactly one unit")
        if output != "sigmoid-binary" and self.n_out < 2:
            raise BadSpec(f"{output} output needs at least two units")

    @property
    def n_classes(self) -> int:
        return 2 if self.output == "sigmoid-binary" else self.n_out

    @property
    def loss_kind(self) -> str:
        return LOSS_OF_OUTPUT[self.output]

    def parameters(self) -> List[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def init(self, seed=0, printed_bound: bool = False):
        rng = _rng(seed)
        for layer in self.layers:
            layer.init(rng, printed_bound)
        return self

    def _batch(self, x) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape == self.input_shape:
            return x[None], True
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"input shape {x.shape} does not match model input {self.input_shape}")
        return x, False

    def forward(self, x) -> Tuple[np.ndarray, ForwardCache]:
        """Output-head activations ``(B, n_out)`` plus the cache for :meth:`backward`."""
        x, _ = self._batch(x)
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x)
            caches.append(c)
        logits = x
        out = softmax(logits) if self.output == "softmax" else sigmoid(logits)
        return out, ForwardCache(caches, logits, out)

    def targets(self, labels) -> np.ndarray:
        """Loss targets for class-index ``labels`` in the shape of the output."""
        labels = np.asarray(labels)
        if labels.ndim == 0:
            labels = labels[None]
        if not np.issubdtype(labels.dtype, np.integer) or labels.size and (
                labels.min() < 0 or labels.max() >= self.n_classes):
            raise BadLabel(f"labels must be class indices in [0, {self.n_classes})")
        if self.output == "sigmoid-binary":
            return (labels == 0).astype(np.float64)[:, None]
        if self.output == "softmax":
            return labels
        return np.eye(self.n_out)[labels]

    def loss(self, out, labels) -> float:
        t = self.targets(labels)
        if self.output == "softmax":
            return loss(out, t, "cce")
        return loss(out, t, "bce")

    def backward(self, cache: ForwardCache, labels) -> List[np.ndarray]:
        """Gradients of the mean batch loss, aligned with :meth:`parameters`.

        For every head the gradient at the logits is ``(out - target) / count``,
        i.e. the derivative of the unclamped loss.
        """
        t = self.targets(labels)
        out = cache.out
        if t.shape[0] != out.shape[0]:
            raise ShapeMismatch("labels and cached batch differ in size")
        if self.output == "softmax":
            dz = out.copy()
            dz[np.arange(len(t)), t] -= 1.0
            dz /= len(t)
        else:
            dz = (out - t) / t.size
        grads_rev = []
        for layer, c in zip(reversed(self.layers), reversed(cache.layer_caches)):
            dz, g = layer.backward(dz, c)
            grads_rev.append(g)
        return [g for gs in reversed(grads_rev) for g in gs]

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        """Class probabilities ``(B, C)``; a binary row is ``(P(pos), P(neg))``."""
        x, single = self._batch(x)
        parts = []
        for i in range(0, len(x), batch_size):
            out, _ = self.forward(x[i:i + batch_size])
            parts.append(out)
        out = np.concatenate(parts) if parts else np.zeros((0, self.n_out))
        if self.output == "sigmoid-binary":
            out = np.hstack([out, 1.0 - out])
        return out[0] if single else out

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=-1)

    def copy(self) -> "Network":
        return network_from_dict(network_to_dict(self))


def forward(model: Network, x):
    return model.forward(x)


def backward(model: Network, cache: ForwardCache, labels):
    return model.backward(cache, labels)


def predict_proba(model: Network, x):
    return model.predict_proba(x)


def loss(probs, labels, kind: str) -> float:
    """Mean cross-entropy with probabilities clamped to ``[1e-7, 1 - 1e-7]``.

    ``bce``: ``probs`` are P(y = 1) and ``labels`` are 0/1 targets of the
    same shape (averaged over every element). ``cce``: ``probs`` are
    ``(..., C)`` rows and ``labels`` class indices.
    """
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(labels)
    if kind == "bce":
        if p.shape != y.shape:
            raise ShapeMismatch(f"bce probabilities {p.shape} and labels {y.shape} differ")
        if not np.all((y == 0) | (y == 1)):
            raise BadLabel("bce labels must be 0 or 1")
        return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
    if kind == "cce":
        if p.shape[:-1] != y.shape:
            raise ShapeMismatch(f"cce probabilities {p.shape} and labels {y.shape} differ")
        if not np.issubdtype(y.dtype, np.integer) or np.any(y < 0) or np.any(y >= p.shape[-1]):
            raise BadLabel(f"cce labels must be class indices below {p.shape[-1]}")
        picked = np.take_along_axis(p, y[..., None], axis=-1)[..., 0]
        return float(np.mean(-np.log(picked)))
    raise ValidationError(f"unknown loss kind {kind!r}")


# -- optimizer ----------------------------------------------------------------


@dataclass
class AdadeltaState:
    rho: float = 0.95
    eps: float = 1e-6
    sq_grad: List[np.ndarray] = field(default_factory=list)
    sq_delta: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0 or not self.eps > 0:
            raise ValidationError("adadelta needs 0 < rho < 1 and eps > 0")

    @classmethod
    def fresh(cls, params, rho=0.95, eps=1e-6) -> "AdadeltaState":
        return cls(rho, eps, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adadelta_update(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdadeltaState):
    """One Adadelta step, updating ``params`` and ``state`` in place.

    E[g^2] <- rho E[g^2] + (1 - rho) g^2
    dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
    """
    if not (len(params) == len(grads) == len(state.sq_grad) == len(state.sq_delta)):
        raise ShapeMismatch("parameter, gradient and accumulator counts differ")
    rho, eps = state.rho, state.eps
    for p, g, eg, ed in zip(params, grads, state.sq_grad, state.sq_delta):
        if not (p.shape == g.shape == eg.shape == ed.shape):
            raise ShapeMismatch(f"shape mismatch {p.shape} vs {g.shape}")
        eg *= rho
        eg += (1.0 - rho) * g * g
        dx = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
        ed *= rho
        ed += (1.0 - rho) * dx * dx
        p += dx
    return params, state


# -- training -----------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    loss: Optional[str] = None
    rho: float = 0.95
    eps: float = 1e-6

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ValidationError("epochs must be at least 1")
        if int(self.batch_size) < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.loss not in (None, "bce", "cce"):
            raise ValidationError(f"unknown loss {self.loss!r}")

    def to_dict(self):
        return asdict(self)


def accuracy(model: Network, X, y) -> float:
    return float(np.mean(model.predict(X) == np.asarray(y))) if len(y) else float("nan")


def train(model: Network, X, y, config: TrainConfig = None, X_val=None, y_val=None):
    """Mini-batch Adadelta training; mutates and returns ``model``.

    Batches are reshuffled every epoch from ``config.seed``. Returns
    ``(model, history)`` where history holds one dict per epoch with the
    mean batch loss, training accuracy and, if given, validation metrics.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(X) == 0:
        raise EmptyDataset("no training examples")
    if len(X) != len(y):
        raise ShapeMismatch(f"{len(X)} inputs but {len(y)} labels")
    if X.shape[1:] != model.input_shape:
        raise ShapeMismatch(f"inputs {X.shape[1:]} do not match model input {model.input_shape}")
    if config.loss is not None and config.loss != model.loss_kind:
        raise BadSpec(f"loss {config.loss} does not fit a {model.output} output")
    model.targets(y)  # label validation up front
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = AdadeltaState.fresh(params, config.rho, config.eps)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), config.batch_size):
            idx = order[start:start + config.batch_size]
            out, cache = model.forward(X[idx])
            total += model.loss(out, y[idx]) * len(idx)
            adadelta_update(params, model.backward(cache, y[idx]), state)
        record = {"epoch": epoch, "loss": total / len(X), "accuracy": accuracy(model, X, y)}
        if X_val is not None and len(X_val):
            record["val_loss"] = model.loss(model.forward(X_val)[0], y_val)
            record["val_accuracy"] = accuracy(model, X_val, y_val)
        history.append(record)
        logger.debug("epoch %d: %s", epoch, record)
    return model, history


# -- gradient check -----------------------------------------------------------


@dataclass
class GradCheckResult:
    max_error: float
    n_checked: int
    n_skipped: int

    def passed(self, tol=1e-4) -> bool:
        return self.max_error < tol


def _kink_signature(model: Network, cache: ForwardCache) -> bytes:
    parts = []
    for layer, c in zip(model.layers, cache.layer_caches):
        if isinstance(layer, ReLU):
            parts.append(np.packbits(c > 0).tobytes())
        elif isinstance(layer, MaxOverTime):
            parts.append(c[1].tobytes())
    return b"|".join(parts)


def gradient_check(model: Network, x, labels, h: float = 1e-5) -> GradCheckResult:
    """Compare backprop gradients with central differences on every parameter.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-12)``. A coordinate whose
    +h or -h perturbation flips a ReLU gate or a max-over-time argmax is a
    kink crossing; it is skipped and counted in ``n_skipped``.
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValidationError("step h must lie in [1e-6, 1e-4]")
    x, _ = model._batch(x)
    labels = np.atleast_1d(np.asarray(labels))
    out, cache = model.forward(x)
    analytic = model.backward(cache, labels)
    base_sig = _kink_signature(model, cache)

    def probe():
        o, c = model.forward(x)
        return model.loss(o, labels), _kink_signature(model, c)

    worst, checked, skipped = 0.0, 0, 0
    for p, g in zip(model.parameters(), analytic):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, sp = probe()
            flat[i] = orig - h
            lm, sm = probe()
            flat[i] = orig
            if sp != base_sig or sm != base_sig:
                skipped += 1
                continue
            num = (lp - lm) / (2 * h)
            a = gflat[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-12)
            worst = max(worst, err)
            checked += 1
    return GradCheckResult(worst, checked, skipped)


# -- serialization ------------------------------------------------------------


def network_to_dict(model: Network, extra: Optional[dict] = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "output": model.output,
        "input_shape": list(model.input_shape),
        "architecture": model.architecture,
        "layers": [layer.spec() for layer in model.layers],
        "params": [[p.tolist() for p in layer.params] for layer in model.layers],
    }
    if extra:
        doc["extra"] = extra
    return doc


def network_from_dict(doc: dict) -> Network:
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported model format_version {doc.get('format_version')!r}")
    try:
        layers = [layer_from_spec(spec, params)
                  for spec, params in zip(doc["layers"], doc["params"], strict=True)]
        return Network(layers, doc["output"], tuple(doc["input_shape"]), doc.get("architecture"))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ShapeMismatch):
            raise
        raise FormatError(f"malformed model document ({e})") from None


def save_model(model: Network, path, extra: Optional[dict] = None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(model, extra), fh)
        fh.write("\n")


def load_model(path) -> Tuple[Network, dict]:
    """Returns the network and the document's ``extra`` metadata."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON ({e.msg})", e.lineno, path) from None
    return network_from_dict(doc), doc.get("extra", {})
