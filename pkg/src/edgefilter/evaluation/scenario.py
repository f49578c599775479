"""Train-once / filter-many experiment runner.

A scenario names a training source and a test target (file, station id,
source kind, optional date range and resampling resolution), a list of
thresholds, and the filter and training configuration. Running it trains
(or loads cached) weights on the source, runs one filter session on the
target per threshold, and records content hashes of every input.
"""

from __future__ import annotations

import enum
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from edgefilter._io import atomic_write_text, sha256_file, sha256_text
from edgefilter.evaluation.metrics import Metrics, mae
from edgefilter.filter import FilterConfig, run_session
from edgefilter.ingest import (
    CsvSchema,
    IngestError,
    SeriesFrame,
    SourceKind,
    chrono_split,
    fit_norm,
    make_windows,
    parse_csv,
    parse_timestamp,
    resample,
)
from edgefilter.predictor import (
    FORMAT_VERSION,
    ModelWeights,
    TrainConfig,
    dumps_weights,
    forward,
    load_weights,
    train,
)
from edgefilter.predictor.serialization import WeightFileError

log = logging.getLogger(__name__)


class SpecError(ValueError):
    """Invalid scenario specification."""


class ScenarioError(RuntimeError):
    """A scenario could not be run (missing data, cache corruption, ...)."""


class CacheError(ScenarioError):
    pass


class ScenarioName(str, enum.Enum):
    SAME_SITE = "same_site"
    CROSS_SITE = "cross_site"
    SATELLITE_SAME_SITE = "satellite_same_site"
    SATELLITE_CROSS_SITE = "satellite_cross_site"


def _stamp(value) -> str | None:
    if value is None:
        return None
    if isinstance(value, (date, datetime)):
        value = value.isoformat()
    try:
        parse_timestamp(str(value))
    except ValueError as exc:
        raise SpecError(f"bad timestamp {value!r}") from exc
    return str(value)


@dataclass(frozen=True)
class DataRef:
    file: str
    source_id: str
    kind: SourceKind = SourceKind.IN_SITU
    start: str | None = None
    end: str | None = None
    resolution: int | None = None
    timestamp_col: str = "timestamp"
    value_col: str = "value"

    @classmethod
    def from_dict(cls, d: dict, where: str) -> "DataRef":
        if not isinstance(d, dict):
            raise SpecError(f"{where}: expected a mapping")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecError(f"{where}: unknown key(s) {sorted(unknown)}")
        if "file" not in d:
            raise SpecError(f"{where}: 'file' is required")
        try:
            kind = SourceKind(d.get("kind", SourceKind.IN_SITU))
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from exc
        res = d.get("resolution")
        if res is not None and (not isinstance(res, int) or res <= 0):
            raise SpecError(f"{where}: resolution must be a positive integer of seconds")
        return cls(
            file=str(d["file"]),
            source_id=str(d.get("source_id", Path(str(d["file"])).stem)),
            kind=kind,
            start=_stamp(d.get("start")),
            end=_stamp(d.get("end")),
            resolution=res,
            timestamp_col=str(d.get("timestamp_col", "timestamp")),
            value_col=str(d.get("value_col", "value")),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    def bounds(self) -> tuple[int | None, int | None]:
        s = parse_timestamp(self.start) if self.start else None
        e = parse_timestamp(self.end) if self.end else None
        return s, e

    def load(self, data_root: str | Path) -> tuple[SeriesFrame, str]:
        path = Path(data_root) / self.file
        if not path.is_file():
            raise ScenarioError(f"missing data file {path}")
        try:
            frame, _ = parse_csv(
                path, CsvSchema(self.timestamp_col, self.value_col),
                source_id=self.source_id, kind=self.kind,
            )
            if self.resolution is not None:
                frame = resample(frame, self.resolution)
        except IngestError as exc:
            raise ScenarioError(str(exc)) from exc
        frame = frame.slice_time(*self.bounds())
        if len(frame) == 0:
            raise ScenarioError(f"{path}: no samples in range [{self.start}, {self.end})")
        return frame, sha256_file(path)


def _overlap(a: DataRef, b: DataRef) -> bool:
    (s1, e1), (s2, e2) = a.bounds(), b.bounds()
    lo = max(s1 if s1 is not None else -np.inf, s2 if s2 is not None else -np.inf)
    hi = min(e1 if e1 is not None else np.inf, e2 if e2 is not None else np.inf)
    return lo < hi


@dataclass(frozen=True)
class ScenarioSpec:
    name: ScenarioName
    train_source: DataRef
    test_target: DataRef
    thresholds: tuple[float, ...]
    filter_cfg: dict = field(default_factory=dict)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    label: str = ""

    def __post_init__(self):
        if not self.thresholds:
            raise SpecError("thresholds must be nonempty")
        if any(not float(t) > 0 for t in self.thresholds):
            raise SpecError("every threshold must be > 0")
        for t in self.thresholds:
            self.filter_config(t)  # validates k / policy names
        src, tgt = self.train_source, self.test_target
        if (src.file, src.source_id, src.kind) == (tgt.file, tgt.source_id, tgt.kind) and _overlap(src, tgt):
            raise SpecError(f"scenario {self.label or self.name.value}: train and test ranges overlap")

    @property
    def k(self) -> int:
        return int(self.filter_cfg.get("k", 24))

    def filter_config(self, epsilon: float) -> FilterConfig:
        try:
            return FilterConfig(epsilon=epsilon, **{**self.filter_cfg, "k": self.k})
        except (TypeError, ValueError) as exc:
            raise SpecError(f"bad filter config: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict, defaults: dict | None = None) -> "ScenarioSpec":
        d = {**(defaults or {}), **d}
        where = f"scenario {d.get('label') or d.get('name', '?')}"
        allowed = {"name", "label", "train_source", "test_target", "thresholds", "filter", "train"}
        unknown = set(d) - allowed
        if unknown:
            raise SpecError(f"{where}: unknown key(s) {sorted(unknown)}")
        try:
            name = ScenarioName(d.get("name"))
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from exc
        thresholds = d.get("thresholds", [0.5, 1.0])
        if not isinstance(thresholds, list):
            raise SpecError(f"{where}: thresholds must be a list")
        filter_cfg = dict(d.get("filter") or {})
        bad = set(filter_cfg) - {"k", "buffer_policy", "sync_mode", "pad_policy"}
        if bad:
            raise SpecError(f"{where}: unknown filter key(s) {sorted(bad)}")
        try:
            train_cfg = TrainConfig.from_dict(dict(d.get("train") or {}))
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from exc
        return cls(
            name=name,
            train_source=DataRef.from_dict(d.get("train_source"), f"{where}.train_source"),
            test_target=DataRef.from_dict(d.get("test_target"), f"{where}.test_target"),
            thresholds=tuple(float(t) for t in thresholds),
            filter_cfg=filter_cfg,
            train_cfg=train_cfg,
            label=str(d.get("label", "")),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name.value,
            "label": self.label,
            "train_source": self.train_source.to_dict(),
            "test_target": self.test_target.to_dict(),
            "thresholds": list(self.thresholds),
            "filter": {k: (v.value if isinstance(v, enum.Enum) else v) for k, v in self.filter_cfg.items()},
            "train": self.train_cfg.to_dict(),
        }


def load_scenarios(path: str | Path) -> list[ScenarioSpec]:
    """Read a YAML (or JSON) scenario file: ``{defaults: {...}, scenarios: [...]}``."""
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SpecError(f"cannot read scenario file {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise SpecError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("scenarios"), list) or not doc["scenarios"]:
        raise SpecError(f"{path}: expected a nonempty 'scenarios' list")
    defaults = doc.get("defaults") or {}
    return [ScenarioSpec.from_dict(s, defaults) for s in doc["scenarios"]]


@dataclass
class ScenarioReport:
    spec: dict
    rows: list[Metrics]
    mae: float
    provenance: dict

    @property
    def train_source_id(self) -> str:
        return self.spec["train_source"]["source_id"]

    @property
    def test_source_id(self) -> str:
        return self.spec["test_target"]["source_id"]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "rows": [m.to_dict() for m in self.rows],
            "mae": self.mae,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioReport":
        return cls(d["spec"], [Metrics(**m) for m in d["rows"]], d["mae"], d["provenance"])


def _cache_key(spec: ScenarioSpec, train_sha: str) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "train_source": spec.train_source.to_dict(),
        "train_sha256": train_sha,
        "train_cfg": spec.train_cfg.to_dict(),
        "window": spec.k,
    }
    return sha256_text(json.dumps(payload, sort_keys=True))


def train_weights(frame: SeriesFrame, k: int, cfg: TrainConfig) -> ModelWeights:
    stats = fit_norm(frame)
    windows = make_windows(frame, k, stats)
    tr, va = chrono_split(windows, 1.0 - cfg.val_frac)
    weights, _ = train(tr, va, cfg, source_id=frame.source_id, kind=frame.kind)
    return weights


def _obtain_weights(spec, frame, key, cache_dir) -> ModelWeights:
    path = Path(cache_dir) / f"{key}.json" if cache_dir else None
    if path is not None and path.exists():
        try:
            w = load_weights(path)
        except WeightFileError as exc:
            raise CacheError(f"unreadable cached weights {path}: {exc}") from exc
        if w.extra.get("cache_key") != key:
            raise CacheError(f"cached weights {path} do not match key {key}")
        return w
    w = train_weights(frame, spec.k, spec.train_cfg)
    w = ModelWeights(w.params, w.norm, w.source_id, w.kind, w.seed, extra={"cache_key": key})
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(path, dumps_weights(w))
    return w


def open_loop_mae(frame: SeriesFrame, weights: ModelWeights) -> float:
    """One-step forecasts from true history over every gap-free window."""
    ws = make_windows(frame, weights.window, weights.norm)
    preds = np.array([forward(x, weights) for x in ws.inputs])
    return mae(preds, weights.norm.denormalize(ws.targets))


def run_scenario(spec: ScenarioSpec, data_root: str | Path, cache_dir: str | Path | None = None) -> ScenarioReport:
    train_frame, train_sha = spec.train_source.load(data_root)
    test_frame, test_sha = spec.test_target.load(data_root)
    key = _cache_key(spec, train_sha)
    weights = _obtain_weights(spec, train_frame, key, cache_dir)

    rows = []
    for eps in spec.thresholds:
        tlog, _ = run_session(test_frame, weights, spec.filter_config(eps))
        rows.append(Metrics.from_log(eps, tlog))
    try:
        overall = open_loop_mae(test_frame, weights)
    except IngestError as exc:
        raise ScenarioError(f"test target too short for window {spec.k}: {exc}") from exc

    provenance = {
        "weights_sha256": sha256_text(dumps_weights(weights)),
        "train_data_sha256": train_sha,
        "test_data_sha256": test_sha,
        "cache_key": key,
        "seed": spec.train_cfg.seed,
        "sync_mode": spec.filter_config(spec.thresholds[0]).sync_mode.value,
        "buffer_policy": spec.filter_config(spec.thresholds[0]).buffer_policy.value,
    }
    return ScenarioReport(spec.to_dict(), rows, overall, provenance)


def _run_one(args) -> tuple[int, Any]:
    i, spec, data_root, cache_dir = args
    try:
        return i, run_scenario(spec, data_root, cache_dir)
    except Exception as exc:  # reported per scenario; others keep running
        log.error("scenario %s failed: %s", spec.label or spec.name.value, exc)
        return i, exc


def run_scenarios(
    specs: Sequence[ScenarioSpec],
    data_root: str | Path,
    cache_dir: str | Path | None = None,
    workers: int | None = None,
) -> list[ScenarioReport | Exception]:
    """Run every scenario; failures are returned in place of their report."""
    workers = workers or os.cpu_count() or 1
    jobs = [(i, s, data_root, cache_dir) for i, s in enumerate(specs)]
    if workers == 1 or len(specs) == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(specs))) as pool:
            results = list(pool.map(_run_one, jobs))
    return [r for _, r in sorted(results, key=lambda x: x[0])]
