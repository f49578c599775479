"""Edge-side transmission filter and its cloud-side mirror.

The edge forecasts each new reading from a rolling buffer and transmits only
when the absolute forecast error exceeds ``epsilon``. The cloud runs the same
model on a mirror of that buffer and fills every untransmitted slot with its
own forecast.

Two knobs cover behaviour the basic algorithm leaves open:

``buffer_policy``
    ``reset_on_transmit`` restarts the buffer from the transmitted reading;
    ``sliding`` keeps appending and truncates to the last ``k`` entries.
``sync_mode``
    ``synchronized`` appends the edge's forecast (not the withheld reading)
    on suppression, so the cloud mirror stays bit-identical and every
    reconstructed value is within ``epsilon`` of the truth.
    ``paper_faithful`` appends the withheld reading on the edge; the cloud
    can only append its forecast, so the two may drift apart.

A flag-forced transmission (first sample of a session, first sample after a
gap) always restarts the buffer from that reading.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from edgefilter._io import atomic_write_text
from edgefilter.ingest import Measurement, SeriesFrame, format_timestamp


class FilterError(ValueError):
    pass


class DesyncError(RuntimeError):
    """Cloud mirror diverged from the edge buffer in synchronized mode."""


class BufferPolicy(str, enum.Enum):
    RESET_ON_TRANSMIT = "reset_on_transmit"
    SLIDING = "sliding"


class SyncMode(str, enum.Enum):
    SYNCHRONIZED = "synchronized"
    PAPER_FAITHFUL = "paper_faithful"


class PadPolicy(str, enum.Enum):
    REPLICATE_OLDEST = "replicate_oldest"


class Decision(str, enum.Enum):
    TRANSMIT = "transmit"
    SUPPRESS = "suppress"


class Forecaster(Protocol):
    window: int

    def predict_window(self, values) -> float: ...


@dataclass(frozen=True)
class FilterConfig:
    epsilon: float
    k: int
    buffer_policy: BufferPolicy = BufferPolicy.RESET_ON_TRANSMIT
    sync_mode: SyncMode = SyncMode.SYNCHRONIZED
    pad_policy: PadPolicy = PadPolicy.REPLICATE_OLDEST

    def __post_init__(self):
        eps = float(self.epsilon)
        if not eps > 0:
            raise FilterError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.k) < 1:
            raise FilterError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "buffer_policy", BufferPolicy(self.buffer_policy))
        object.__setattr__(self, "sync_mode", SyncMode(self.sync_mode))
        object.__setattr__(self, "pad_policy", PadPolicy(self.pad_policy))


@dataclass(frozen=True)
class FilterState:
    buffer: tuple[float, ...] = ()
    transmit_flag: bool = True


@dataclass(frozen=True)
class StepOutcome:
    decision: Decision
    actual: float
    predicted: float | None = None
    abs_error: float | None = None

    @property
    def forced(self) -> bool:
        return self.predicted is None


def pad_buffer(buffer: Sequence[float], k: int, pad_policy: PadPolicy = PadPolicy.REPLICATE_OLDEST) -> np.ndarray:
    """Exactly ``k`` values: the last ``k``, or left-padded with the oldest."""
    if len(buffer) == 0:
        raise FilterError("cannot pad an empty buffer")
    if PadPolicy(pad_policy) is not PadPolicy.REPLICATE_OLDEST:
        raise FilterError(f"unknown pad policy {pad_policy!r}")
    buf = list(buffer)
    if len(buf) >= k:
        return np.array(buf[-k:], dtype=np.float64)
    return np.array([buf[0]] * (k - len(buf)) + buf, dtype=np.float64)


def _check_model(model: Forecaster, cfg: FilterConfig) -> None:
    if model.window != cfg.k:
        raise FilterError(f"model window {model.window} does not match filter k={cfg.k}")


def _after_transmit(buffer: tuple, x: float, cfg: FilterConfig) -> tuple:
    if cfg.buffer_policy is BufferPolicy.RESET_ON_TRANSMIT:
        return (x,)
    return (buffer + (x,))[-cfg.k :]


def edge_step(
    state: FilterState, x: float | Measurement, model: Forecaster, cfg: FilterConfig
) -> tuple[StepOutcome, FilterState]:
    x = float(x.value if isinstance(x, Measurement) else x)
    if not math.isfinite(x):
        raise FilterError(f"non-finite measurement {x}")
    _check_model(model, cfg)
    if state.transmit_flag:
        return StepOutcome(Decision.TRANSMIT, x), FilterState((x,), False)

    pred = float(model.predict_window(pad_buffer(state.buffer, cfg.k, cfg.pad_policy)))
    err = abs(x - pred)
    if err > cfg.epsilon:
        return (
            StepOutcome(Decision.TRANSMIT, x, pred, err),
            FilterState(_after_transmit(state.buffer, x, cfg), False),
        )
    kept = pred if cfg.sync_mode is SyncMode.SYNCHRONIZED else x
    return (
        StepOutcome(Decision.SUPPRESS, x, pred, err),
        FilterState((state.buffer + (kept,))[-cfg.k :], False),
    )


def cloud_step(
    mirror: FilterState, received: float | None, model: Forecaster, cfg: FilterConfig
) -> tuple[float, FilterState]:
    """Reconstruct one slot from an optional received value.

    In synchronized mode a value received while the cloud's own forecast
    lies within ``epsilon`` means the edge and cloud saw different buffers,
    which raises :class:`DesyncError`.
    """
    _check_model(model, cfg)
    if mirror.transmit_flag:
        if received is None:
            raise DesyncError("cloud expected a forced transmission but received nothing")
        received = float(received)
        return received, FilterState((received,), False)

    pred = float(model.predict_window(pad_buffer(mirror.buffer, cfg.k, cfg.pad_policy)))
    if received is None:
        return pred, FilterState((mirror.buffer + (pred,))[-cfg.k :], False)
    received = float(received)
    if cfg.sync_mode is SyncMode.SYNCHRONIZED and not abs(received - pred) > cfg.epsilon:
        raise DesyncError(
            f"received {received!r} although the mirrored forecast {pred!r} is within epsilon"
        )
    return received, FilterState(_after_transmit(mirror.buffer, received, cfg), False)


@dataclass
class TransmissionLog:
    timestamps: np.ndarray
    outcomes: list[StepOutcome] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def transmitted(self) -> int:
        return sum(o.decision is Decision.TRANSMIT for o in self.outcomes)

    @property
    def suppressed(self) -> int:
        return self.total - self.transmitted

    def transmitted_indices(self) -> list[int]:
        return [i for i, o in enumerate(self.outcomes) if o.decision is Decision.TRANSMIT]

    def predicted_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(predictions, actuals) for every step that carried a forecast."""
        pairs = [(o.predicted, o.actual) for o in self.outcomes if o.predicted is not None]
        if not pairs:
            return np.empty(0), np.empty(0)
        p, a = zip(*pairs)
        return np.array(p), np.array(a)

    def to_csv(self) -> str:
        lines = ["index,timestamp,actual,predicted,abs_error,decision"]
        for i, (t, o) in enumerate(zip(self.timestamps.tolist(), self.outcomes)):
            pred = "" if o.predicted is None else repr(o.predicted)
            err = "" if o.abs_error is None else repr(o.abs_error)
            lines.append(f"{i},{format_timestamp(t)},{o.actual!r},{pred},{err},{o.decision.value}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_csv())


@dataclass
class ReconstructedSeries:
    timestamps: np.ndarray
    values: np.ndarray
    is_prediction: np.ndarray

    def to_csv(self) -> str:
        lines = ["timestamp,value,is_prediction"]
        for t, v, p in zip(self.timestamps.tolist(), self.values.tolist(), self.is_prediction.tolist()):
            lines.append(f"{format_timestamp(t)},{v!r},{int(p)}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_csv())


def _as_frame(series) -> SeriesFrame:
    if isinstance(series, SeriesFrame):
        return series
    values = np.asarray(series, dtype=np.float64)
    return SeriesFrame("", "in_situ", 1, np.arange(len(values), dtype=np.int64), values)


def run_session(
    series: SeriesFrame | Sequence[float],
    model: Forecaster,
    cfg: FilterConfig,
    *,
    check_sync: bool = True,
) -> tuple[TransmissionLog, ReconstructedSeries]:
    """Run edge and cloud in lockstep over a whole series.

    A plain sequence is treated as one gap-free run. In synchronized mode the
    mirror is compared with the edge buffer after every step.
    """
    frame = _as_frame(series)
    if len(frame) == 0:
        raise FilterError("empty series")
    _check_model(model, cfg)
    ts = frame.timestamps
    values = frame.values.tolist()
    verify = check_sync and cfg.sync_mode is SyncMode.SYNCHRONIZED

    edge = FilterState()
    cloud = FilterState()
    outcomes: list[StepOutcome] = []
    recon = np.empty(len(values))
    is_pred = np.zeros(len(values), dtype=bool)
    for idx, x in enumerate(values):
        if idx and ts[idx] - ts[idx - 1] != frame.resolution:
            edge = FilterState()
            cloud = FilterState()
        outcome, edge = edge_step(edge, x, model, cfg)
        received = x if outcome.decision is Decision.TRANSMIT else None
        recon[idx], cloud = cloud_step(cloud, received, model, cfg)
        is_pred[idx] = received is None
        if verify and cloud.buffer != edge.buffer:
            raise DesyncError(f"edge and cloud buffers differ after step {idx}")
        outcomes.append(outcome)
    return TransmissionLog(ts.copy(), outcomes), ReconstructedSeries(ts.copy(), recon, is_pred)
