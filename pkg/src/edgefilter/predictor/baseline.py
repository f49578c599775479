from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from edgefilter.ingest import NormStats


def persistence_predict(window, norm: NormStats | None = None) -> float:
    """Last value of the window, mapped back to physical units if ``norm`` is given."""
    window = np.asarray(window, dtype=np.float64)
    if window.size == 0:
        raise ValueError("persistence forecast needs a nonempty window")
    last = float(window.reshape(-1)[-1])
    return last if norm is None else float(norm.denormalize(last))


@dataclass(frozen=True)
class PersistenceModel:
    """Naive forecaster usable wherever the filter expects a model."""

    window: int = 1

    def predict_window(self, values) -> float:
        return persistence_predict(values)
