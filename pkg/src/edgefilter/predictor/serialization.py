"""Versioned JSON weight files.

Floats are written with Python's shortest round-trip ``repr``, so a
save/load cycle reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from edgefilter._io import atomic_write_text
from edgefilter.ingest import IngestError, NormStats, SourceKind
from edgefilter.predictor.params import (
    FORMAT_VERSION,
    GATES,
    DimensionError,
    LstmParams,
    ModelWeights,
)


class WeightFileError(ValueError):
    """Corrupted or structurally invalid weight file."""


class WeightVersionError(WeightFileError):
    pass


def weights_to_dict(w: ModelWeights) -> dict:
    p = w.params
    params = {}
    for gi, gate in enumerate(GATES):
        params[f"w{gate}"] = p.input_w[gi].tolist()
    for gi, gate in enumerate(GATES):
        params[f"u{gate}"] = p.recur_w[gi].tolist()
    for gi, gate in enumerate(GATES):
        params[f"b{gate}"] = p.bias[gi].tolist()
    params["dense_w"] = p.dense_w.tolist()
    params["dense_b"] = p.dense_b
    kind = w.kind.value if isinstance(w.kind, SourceKind) else str(w.kind)
    meta = {"source_id": w.source_id, "kind": kind, "seed": w.seed}
    meta.update(w.extra)
    return {
        "format_version": FORMAT_VERSION,
        "arch": {"input": p.input_size, "hidden": p.hidden_size, "window": p.window},
        "norm": {"mean": w.norm.mean, "std": w.norm.std},
        "params": params,
        "metadata": meta,
    }


def dumps_weights(w: ModelWeights) -> str:
    return json.dumps(weights_to_dict(w), separators=(",", ":"), allow_nan=False) + "\n"


def save_weights(w: ModelWeights, path: str | Path) -> None:
    atomic_write_text(path, dumps_weights(w))


def _matrix(params: dict, name: str, rows: int, cols: int) -> np.ndarray:
    m = params.get(name)
    if not isinstance(m, list) or len(m) != rows:
        got = len(m) if isinstance(m, list) else type(m).__name__
        raise DimensionError(f"{name}: expected {rows} rows, got {got}")
    for r, row in enumerate(m):
        if not isinstance(row, list) or len(row) != cols:
            raise DimensionError(f"{name}[{r}]: expected {cols} columns")
    return np.array(m, dtype=np.float64)


def _vector(params: dict, name: str, n: int) -> np.ndarray:
    v = params.get(name)
    if not isinstance(v, list) or len(v) != n:
        raise DimensionError(f"{name}: expected a vector of length {n}")
    return np.array(v, dtype=np.float64)


def weights_from_dict(doc: dict) -> ModelWeights:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise WeightFileError("not a weight file: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise WeightVersionError(
            f"unsupported weight format version {doc['format_version']!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    try:
        arch, norm, params = doc["arch"], doc["norm"], doc["params"]
        H, I, k = int(arch["hidden"]), int(arch["input"]), int(arch["window"])
        meta = dict(doc.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFileError(f"malformed weight file: {exc}") from exc

    input_w = np.stack([_matrix(params, f"w{g}", H, I) for g in GATES])
    recur_w = np.stack([_matrix(params, f"u{g}", H, H) for g in GATES])
    bias = np.stack([_vector(params, f"b{g}", H) for g in GATES])
    dense_w = _vector(params, "dense_w", H)
    dense_b = params.get("dense_b")
    if not isinstance(dense_b, (int, float)) or not math.isfinite(dense_b):
        raise WeightFileError("dense_b must be a finite number")
    try:
        stats = NormStats(float(norm["mean"]), float(norm["std"]))
    except (KeyError, TypeError, IngestError) as exc:
        raise WeightFileError(f"bad normalization block: {exc}") from exc
    lp = LstmParams(input_w, recur_w, bias, dense_w, dense_b, k)
    source_id = meta.pop("source_id", "")
    kind = meta.pop("kind", SourceKind.IN_SITU.value)
    seed = meta.pop("seed", None)
    return ModelWeights(lp, stats, source_id=source_id, kind=kind, seed=seed, extra=meta)


def load_weights(path: str | Path) -> ModelWeights:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise WeightFileError(f"cannot read weight file {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"corrupted weight file {path}: {exc}") from exc
    return weights_from_dict(doc)
