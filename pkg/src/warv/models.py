"""Builders for the feed-forward and convolutional review classifiers."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Union

from .errors import BadSpec
from .nn import Conv1D, Dense, MaxOverTime, Network, ReLU

HiddenSize = Union[int, str]

# hidden layouts compared for the feed-forward model, as multiples of d
FIG2_FAMILY = (["d/4"], ["d/2"], ["d"], ["d/2", "d/2"], ["d/2", "d/2", "d/2"], ["d", "d/2", "d/2"])
DEFAULT_HIDDEN = ["d/2"]


def resolve_size(size: HiddenSize, d: int) -> int:
    """Turn ``"d"``, ``"d/2"``, ``"2d"``... or a plain integer into a unit count."""
    if isinstance(size, bool):
        raise BadSpec(f"invalid hidden size {size!r}")
    if isinstance(size, int):
        value = Fraction(size)
    else:
        text = str(size).replace(" ", "").replace("*", "")
        num, _, den = text.partition("/")
        if num.endswith("d"):
            coef = num[:-1] or "1"
        elif num.isdigit():
            coef, d = num, 1
        else:
            raise BadSpec(f"invalid hidden size {size!r}")
        try:
            value = Fraction(int(coef) * d, int(den) if den else 1)
        except (ValueError, ZeroDivisionError):
            raise BadSpec(f"invalid hidden size {size!r}") from None
    if value.denominator != 1 or value < 1:
        raise BadSpec(f"hidden size {size!r} is not a positive integer for d={d}")
    return int(value)


def output_kind(n_classes: int) -> str:
    if n_classes == 2:
        return "sigmoid-binary"
    if n_classes == 3:
        return "softmax"
    raise BadSpec(f"n_classes must be 2 or 3, got {n_classes}")


@dataclass
class ArchitectureSpec:
    kind: str = "ffnn"
    input_dim: int = 600
    hidden: List[HiddenSize] = field(default_factory=lambda: list(DEFAULT_HIDDEN))
    max_len: Optional[int] = None
    window: int = 5
    n_filters: Optional[int] = None
    n_classes: int = 2
    printed_init_bound: bool = False

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ArchitectureSpec":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadSpec(f"unknown architecture keys {sorted(unknown)}")
        return cls(**doc)

    def build(self, seed=0) -> Network:
        if self.kind == "ffnn":
            return build_ffnn(self.input_dim, self.hidden, self.n_classes, seed, self.printed_init_bound)
        if self.kind == "cnn":
            if self.max_len is None:
                raise BadSpec("cnn architecture needs max_len")
            return build_cnn(self.input_dim, self.max_len, self.window, self.n_filters,
                             self.n_classes, seed, self.printed_init_bound)
        raise BadSpec(f"unknown architecture kind {self.kind!r}")


def build_ffnn(d: int, hidden_spec: Sequence[HiddenSize] = DEFAULT_HIDDEN, n_classes: int = 2,
               seed=0, printed_init_bound: bool = False) -> Network:
    """Dense layers with ReLU between them and a sigmoid (2 classes) or
    softmax (3 classes) output. An empty ``hidden_spec`` gives logistic
    regression."""
    if d < 1:
        raise BadSpec("input dimension must be positive")
    out = output_kind(n_classes)
    sizes = [d] + [resolve_size(s, d) for s in hidden_spec]
    layers = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        layers += [Dense(n_in, n_out), ReLU()]
    layers.append(Dense(sizes[-1], 1 if out == "sigmoid-binary" else n_classes))
    arch = ArchitectureSpec("ffnn", d, list(hidden_spec), n_classes=n_classes,
                            printed_init_bound=printed_init_bound)
    return Network(layers, out, (d,), arch.to_dict()).init(seed, printed_init_bound)


def build_cnn(d: int, max_len: int, window: int = 5, n_filters: Optional[int] = None,
              n_classes: int = 2, seed=0, printed_init_bound: bool = False) -> Network:
    """conv1d -> ReLU -> max-over-time -> dense output. ``n_filters`` defaults to ``d``."""
    if window < 1 or max_len < 1:
        raise BadSpec("window and max_len must be positive")
    if window > max_len:
        raise BadSpec(f"window {window} exceeds max_len {max_len}")
    n_filters = d if n_filters is None else n_filters
    out = output_kind(n_classes)
    layers = [Conv1D(d, window, n_filters), ReLU(), MaxOverTime(),
              Dense(n_filters, 1 if out == "sigmoid-binary" else n_classes)]
    arch = ArchitectureSpec("cnn", d, [], max_len, window, n_filters, n_classes, printed_init_bound)
    return Network(layers, out, (max_len, d), arch.to_dict()).init(seed, printed_init_bound)
