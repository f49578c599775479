from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edgefilter.ingest import NormStats
from edgefilter.predictor import LstmParams, ModelWeights, init_params

ACCEPTANCE_RESULTS: dict[str, str] = {}


def random_weights(rng: np.random.Generator, hidden: int, window: int, scale: float = 1.0) -> ModelWeights:
    """Random LSTM with random normalization, for filter/property tests."""
    p = init_params(hidden, 1, window, int(rng.integers(0, 2**31)))
    p = LstmParams(
        p.input_w * scale,
        p.recur_w * scale,
        rng.normal(0, 0.5, p.bias.shape),
        rng.normal(0, 1.0, hidden),
        float(rng.normal(0, 0.3)),
        window,
    )
    norm = NormStats(float(rng.uniform(-5, 25)), float(rng.uniform(0.5, 10)))
    return ModelWeights(p, norm, source_id="rand", seed=0)


def write_series(path: Path, stamps, values, header="timestamp,value") -> Path:
    lines = [header] + [f"{t},{v}" for t, v in zip(stamps, values)]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{name}: {ACCEPTANCE_RESULTS[name]}")
