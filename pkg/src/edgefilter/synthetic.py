from __future__ import annotations

import numpy as np

from edgefilter.ingest import SeriesFrame, SourceKind, parse_timestamp
from edgefilter.rng import Stream, generator


def synthetic_temperature(
    n_hours: int = 8760,
    *,
    seed: int = 0,
    mean: float = 12.0,
    daily_amplitude: float = 8.0,
    annual_amplitude: float = 10.0,
    noise_std: float = 0.3,
    start: str = "2021-01-01T00:00:00Z",
    source_id: str = "synthetic",
) -> SeriesFrame:
    """Hourly air temperature: daily and annual sinusoids plus Gaussian noise.

    The daily cycle peaks mid-afternoon and the annual cycle in mid-July.
    """
    hours = np.arange(n_hours, dtype=np.float64)
    daily = -daily_amplitude * np.cos(2 * np.pi * (hours - 3.0) / 24.0)
    annual = -annual_amplitude * np.cos(2 * np.pi * (hours - 15 * 24.0) / 8760.0)
    noise = generator(seed, Stream.SYNTHETIC).normal(0.0, noise_std, n_hours)
    t0 = parse_timestamp(start)
    ts = t0 + 3600 * np.arange(n_hours, dtype=np.int64)
    return SeriesFrame(source_id, SourceKind.IN_SITU, 3600, ts, mean + daily + annual + noise)
