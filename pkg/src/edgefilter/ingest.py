"""Loading, validating, resampling and windowing of scalar sensor series.

Timestamps are carried internally as integer POSIX seconds (UTC) so that
resolution and gap arithmetic stays exact.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


class IngestError(ValueError):
    """Raised when a series cannot be parsed, resampled or windowed."""

    def __init__(self, message: str, rows: Sequence[int] = ()):
        super().__init__(message)
        self.rows = list(rows)


class SourceKind(str, enum.Enum):
    IN_SITU = "in_situ"
    SATELLITE = "satellite"


@dataclass(frozen=True)
class Measurement:
    timestamp: datetime
    value: float


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV input."""

    timestamp: str = "timestamp"
    value: str = "value"

    @classmethod
    def from_string(cls, text: str | None) -> "CsvSchema":
        """Parse ``"timestamp=time,value=t2m"``; missing keys keep defaults."""
        if not text:
            return cls()
        fields_ = {}
        for part in text.split(","):
            key, sep, col = part.partition("=")
            key = key.strip()
            if not sep or key not in ("timestamp", "value") or not col.strip():
                raise IngestError(f"bad schema entry {part!r}; expected timestamp=<col> or value=<col>")
            fields_[key] = col.strip()
        return cls(**fields_)


@dataclass(frozen=True)
class ParseReport:
    accepted: int
    rejected: int
    duplicates: int
    gaps: int
    rejected_rows: tuple[int, ...] = ()

    def to_line(self) -> str:
        return json.dumps(
            {
                "accepted": self.accepted,
                "rejected": self.rejected,
                "duplicates": self.duplicates,
                "gaps": self.gaps,
                "rejected_rows": list(self.rejected_rows),
            },
            separators=(",", ":"),
        )


@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """Regularly sampled series with explicit missing intervals.

    ``timestamps`` are strictly increasing POSIX seconds; every consecutive
    difference is ``resolution`` except across entries of ``gaps``, each a
    half-open ``(start, end)`` interval of missing sample times.
    """

    source_id: str
    kind: SourceKind
    resolution: int
    timestamps: np.ndarray
    values: np.ndarray
    gaps: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vs = np.asarray(self.values, dtype=np.float64)
        if ts.shape != vs.shape or ts.ndim != 1:
            raise IngestError("timestamps and values must be 1-D and of equal length")
        if self.resolution <= 0:
            raise IngestError("resolution must be a positive number of seconds")
        if not np.all(np.isfinite(vs)):
            raise IngestError("non-finite value in series")
        diffs = np.diff(ts)
        if np.any(diffs <= 0):
            raise IngestError("timestamps must be strictly increasing")
        if np.any(diffs % self.resolution):
            raise IngestError(f"timestamps are not aligned to resolution {self.resolution}s")
        ts.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)
        object.__setattr__(self, "kind", SourceKind(self.kind))
        object.__setattr__(self, "gaps", compute_gaps(ts, self.resolution))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SeriesFrame):
            return NotImplemented
        return (
            self.source_id == other.source_id
            and self.kind == other.kind
            and self.resolution == other.resolution
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )

    @property
    def measurements(self) -> list[Measurement]:
        return list(self.iter_measurements())

    def iter_measurements(self) -> Iterator[Measurement]:
        for t, v in zip(self.timestamps.tolist(), self.values.tolist()):
            yield Measurement(datetime.fromtimestamp(t, tz=timezone.utc), v)

    def runs(self) -> list[tuple[int, int]]:
        """Index ranges ``[lo, hi)`` of gap-free stretches."""
        if len(self) == 0:
            return []
        breaks = np.flatnonzero(np.diff(self.timestamps) != self.resolution) + 1
        edges = [0, *breaks.tolist(), len(self)]
        return list(zip(edges[:-1], edges[1:]))

    def slice_time(self, start: int | None = None, end: int | None = None) -> "SeriesFrame":
        """Sub-frame with ``start <= t < end`` (POSIX seconds, either bound optional)."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.timestamps >= start
        if end is not None:
            mask &= self.timestamps < end
        return SeriesFrame(
            self.source_id, self.kind, self.resolution, self.timestamps[mask], self.values[mask]
        )


def compute_gaps(timestamps: np.ndarray, resolution: int) -> tuple[tuple[int, int], ...]:
    diffs = np.diff(timestamps)
    idx = np.flatnonzero(diffs != resolution)
    return tuple(
        (int(timestamps[i]) + resolution, int(timestamps[i + 1])) for i in idx.tolist()
    )


def parse_timestamp(text: str) -> int:
    """ISO-8601 to POSIX seconds; naive times are taken as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(math.floor(dt.timestamp()))


def format_timestamp(seconds: int) -> str:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def infer_resolution(timestamps: np.ndarray) -> int:
    """Most frequent positive step; ties go to the smallest."""
    diffs = np.diff(timestamps)
    if len(diffs) == 0:
        raise IngestError("cannot infer resolution from a single sample; pass it explicitly")
    counts = Counter(diffs.tolist())
    best = max(counts.values())
    return int(min(d for d, c in counts.items() if c == best))


def parse_csv(
    path: str | Path,
    schema: CsvSchema | None = None,
    *,
    source_id: str | None = None,
    kind: SourceKind | str = SourceKind.IN_SITU,
    resolution: int | None = None,
) -> tuple[SeriesFrame, ParseReport]:
    """Read a two-column CSV into a :class:`SeriesFrame`.

    Rows whose timestamp or value cannot be parsed, or whose value is not
    finite, are dropped and counted in the returned report. Row numbers in
    the report are 1-based file lines (the header is line 1).
    """
    schema = schema or CsvSchema()
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc

    rows: dict[int, tuple[float, int]] = {}
    rejected: list[int] = []
    duplicates = 0
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        missing = {schema.timestamp, schema.value} - set(reader.fieldnames)
        if missing:
            raise IngestError(f"{path}: missing column(s) {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                t = parse_timestamp(rec[schema.timestamp] or "")
                v = float(rec[schema.value])
            except (TypeError, ValueError):
                rejected.append(lineno)
                continue
            if not math.isfinite(v):
                rejected.append(lineno)
                continue
            if t in rows:
                prev_v, prev_line = rows[t]
                if prev_v != v:
                    raise IngestError(
                        f"{path}: conflicting values for {format_timestamp(t)} "
                        f"on rows {prev_line} and {lineno}",
                        rows=[prev_line, lineno],
                    )
                duplicates += 1
                continue
            rows[t] = (v, lineno)

    if not rows:
        raise IngestError(f"{path}: no valid rows (rejected rows: {rejected})", rows=rejected)

    ts = np.array(sorted(rows), dtype=np.int64)
    vs = np.array([rows[t][0] for t in ts.tolist()], dtype=np.float64)
    if resolution is None:
        resolution = infer_resolution(ts) if len(ts) > 1 else 3600
    frame = SeriesFrame(source_id or path.stem, SourceKind(kind), int(resolution), ts, vs)
    report = ParseReport(len(ts), len(rejected), duplicates, len(frame.gaps), tuple(rejected))
    return frame, report


def write_csv(frame: SeriesFrame, path: str | Path) -> None:
    """Canonical CSV: ``timestamp,value`` with UTC ISO stamps and repr floats."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("timestamp,value\n")
        for t, v in zip(frame.timestamps.tolist(), frame.values.tolist()):
            fh.write(f"{format_timestamp(t)},{v!r}\n")


def resample(frame: SeriesFrame, target_resolution: int) -> SeriesFrame:
    """Downsample by block means over epoch-aligned buckets.

    A bucket is emitted only when every one of its input slots is present;
    incomplete buckets become gaps.
    """
    target_resolution = int(target_resolution)
    if target_resolution < frame.resolution:
        raise IngestError("upsampling is not supported")
    if target_resolution % frame.resolution:
        raise IngestError(
            f"target resolution {target_resolution}s is not a multiple of {frame.resolution}s"
        )
    if target_resolution == frame.resolution:
        return frame
    ratio = target_resolution // frame.resolution
    buckets = frame.timestamps // target_resolution
    keys, starts, counts = np.unique(buckets, return_index=True, return_counts=True)
    full = counts == ratio
    sums = np.add.reduceat(frame.values, starts) if len(starts) else np.array([])
    return SeriesFrame(
        frame.source_id,
        frame.kind,
        target_resolution,
        keys[full] * target_resolution,
        sums[full] / ratio,
    )


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)) or self.std <= 0:
            raise IngestError("NormStats requires finite mean and positive std")

    def normalize(self, values):
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, values):
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


def fit_norm(frame: SeriesFrame | np.ndarray) -> NormStats:
    """Population mean and standard deviation of the frame's values."""
    values = frame.values if isinstance(frame, SeriesFrame) else np.asarray(frame, dtype=np.float64)
    if values.size == 0:
        raise IngestError("cannot fit normalization on an empty series")
    std = float(np.std(values))
    if std == 0.0:
        raise IngestError("constant series: standard deviation is zero")
    return NormStats(float(np.mean(values)), std)


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Normalized (input window, next value) pairs.

    ``target_times`` holds the timestamp of each target, for traceability
    and chronological ordering; ``stats`` is the normalization applied.
    """

    inputs: np.ndarray
    targets: np.ndarray
    k: int
    target_times: np.ndarray
    stats: NormStats | None = None

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, idx) -> "WindowSet":
        return WindowSet(
            self.inputs[idx], self.targets[idx], self.k, self.target_times[idx], self.stats
        )


def make_windows(frame: SeriesFrame, k: int, stats: NormStats) -> WindowSet:
    """Every gap-free run of ``k + 1`` consecutive samples yields one window."""
    if k < 1:
        raise IngestError("window length must be >= 1")
    z = stats.normalize(frame.values)
    inputs, targets, times = [], [], []
    for lo, hi in frame.runs():
        n = hi - lo - k
        if n <= 0:
            continue
        view = np.lib.stride_tricks.sliding_window_view(z[lo:hi], k + 1)
        inputs.append(view[:, :k])
        targets.append(view[:, k])
        times.append(frame.timestamps[lo + k : hi])
    if not inputs:
        raise IngestError(f"no gap-free run of length {k + 1} in series {frame.source_id!r}")
    return WindowSet(
        np.ascontiguousarray(np.concatenate(inputs)),
        np.concatenate(targets),
        k,
        np.concatenate(times),
        stats,
    )


def chrono_split(windows: WindowSet, train_frac: float = 0.8) -> tuple[WindowSet, WindowSet]:
    if not 0.0 < train_frac < 1.0:
        raise IngestError("train_frac must lie strictly between 0 and 1")
    # exact floor: 0.29 * 100 must give 29, not 28
    cut = math.floor(Fraction(repr(float(train_frac))) * len(windows))
    if cut == 0 or cut == len(windows):
        raise IngestError(f"split of {len(windows)} windows at {train_frac} leaves one side empty")
    return windows[:cut], windows[cut:]
