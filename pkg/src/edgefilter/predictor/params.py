from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from edgefilter.ingest import NormStats, SourceKind
from edgefilter.rng import Stream, generator

GATES = ("i", "f", "g", "o")


class DimensionError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LstmParams:
    """Single-layer LSTM with a linear scalar head.

    ``input_w`` has shape ``(4, hidden, input)``, ``recur_w`` ``(4, hidden,
    hidden)`` and ``bias`` ``(4, hidden)``, gate blocks in the order
    input, forget, candidate, output.
    """

    input_w: np.ndarray
    recur_w: np.ndarray
    bias: np.ndarray
    dense_w: np.ndarray
    dense_b: float
    window: int

    def __post_init__(self):
        for name in ("input_w", "recur_w", "bias", "dense_w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "dense_b", float(self.dense_b))
        object.__setattr__(self, "window", int(self.window))
        self.validate()

    def validate(self) -> None:
        wi, wr, b, dw = self.input_w, self.recur_w, self.bias, self.dense_w
        if wi.ndim != 3 or wi.shape[0] != 4:
            raise DimensionError(f"input_w must have shape (4, hidden, input), got {wi.shape}")
        _, h, i = wi.shape
        if h < 1 or i < 1 or self.window < 1:
            raise DimensionError("hidden, input and window must be positive")
        if wr.shape != (4, h, h):
            raise DimensionError(f"recur_w must have shape (4, {h}, {h}), got {wr.shape}")
        if b.shape != (4, h):
            raise DimensionError(f"bias must have shape (4, {h}), got {b.shape}")
        if dw.shape != (h,):
            raise DimensionError(f"dense_w must have shape ({h},), got {dw.shape}")
        for name in ("input_w", "recur_w", "bias", "dense_w"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DimensionError(f"{name} contains non-finite entries")
        if not np.isfinite(self.dense_b):
            raise DimensionError("dense_b is not finite")

    @property
    def hidden_size(self) -> int:
        return self.input_w.shape[1]

    @property
    def input_size(self) -> int:
        return self.input_w.shape[2]

    @property
    def n_params(self) -> int:
        return param_count(self.hidden_size, self.input_size)

    # Stacked (4H, ·) views used by the batched kernels.
    @cached_property
    def w_stack(self) -> np.ndarray:
        return self.input_w.reshape(4 * self.hidden_size, self.input_size)

    @cached_property
    def u_stack(self) -> np.ndarray:
        return self.recur_w.reshape(4 * self.hidden_size, self.hidden_size)

    @cached_property
    def b_stack(self) -> np.ndarray:
        return self.bias.reshape(4 * self.hidden_size)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "input_w": self.input_w,
            "recur_w": self.recur_w,
            "bias": self.bias,
            "dense_w": self.dense_w,
            "dense_b": np.array(self.dense_b),
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], window: int) -> "LstmParams":
        return cls(
            arrays["input_w"],
            arrays["recur_w"],
            arrays["bias"],
            arrays["dense_w"],
            float(np.asarray(arrays["dense_b"])),
            window,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([np.ravel(a) for a in self.arrays().values()])

    def with_flat(self, vec: np.ndarray) -> "LstmParams":
        out, pos = {}, 0
        for name, a in self.arrays().items():
            n = a.size
            out[name] = np.asarray(vec[pos : pos + n]).reshape(a.shape)
            pos += n
        return LstmParams.from_arrays(out, self.window)

    @classmethod
    def zeros(cls, hidden: int, input: int = 1, window: int = 24) -> "LstmParams":
        return cls(
            np.zeros((4, hidden, input)),
            np.zeros((4, hidden, hidden)),
            np.zeros((4, hidden)),
            np.zeros(hidden),
            0.0,
            window,
        )


def param_count(hidden: int, input: int) -> int:
    return 4 * (hidden * (input + hidden) + hidden) + hidden + 1


def init_params(hidden: int, input: int, window: int, seed: int) -> LstmParams:
    """Glorot-uniform gate blocks, zero biases except a forget bias of 1."""
    if min(hidden, input, window) < 1:
        raise DimensionError("hidden, input and window must be positive")
    rng = generator(seed, Stream.INIT)
    a_in = np.sqrt(6.0 / (input + hidden))
    a_rec = np.sqrt(6.0 / (hidden + hidden))
    input_w = rng.uniform(-a_in, a_in, size=(4, hidden, input))
    recur_w = rng.uniform(-a_rec, a_rec, size=(4, hidden, hidden))
    bias = np.zeros((4, hidden))
    bias[GATES.index("f")] = 1.0
    a_dense = np.sqrt(6.0 / (hidden + 1))
    dense_w = rng.uniform(-a_dense, a_dense, size=hidden)
    return LstmParams(input_w, recur_w, bias, dense_w, 0.0, window)


FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """Deployable forecaster: parameters plus the normalization they expect."""

    params: LstmParams
    norm: NormStats
    source_id: str = ""
    kind: SourceKind | str = SourceKind.IN_SITU
    seed: int | None = None
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def window(self) -> int:
        return self.params.window

    def predict_window(self, values) -> float:
        """One-step forecast in physical units from ``window`` raw values."""
        from edgefilter.predictor.lstm import forward

        return forward(self.norm.normalize(values), self)

    def with_params(self, params: LstmParams) -> "ModelWeights":
        return replace(self, params=params)
