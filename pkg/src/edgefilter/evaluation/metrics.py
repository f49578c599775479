from __future__ import annotations

from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from edgefilter.filter import TransmissionLog


def data_reduction(total: int, transmitted: int) -> float:
    """Percentage of readings never transmitted: ``(1 - transmitted/total) * 100``."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= transmitted <= total:
        raise ValueError(f"transmitted={transmitted} outside [0, {total}]")
    return (1.0 - transmitted / total) * 100.0


def mae(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"mismatched inputs: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mae of an empty series")
    return float(np.mean(np.abs(p - t)))


def round_half_up(x: float, places: int) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Metrics:
    threshold: float
    total: int
    transmitted: int
    correct: int
    reduction_pct: float
    mae: float | None

    @classmethod
    def from_counts(cls, threshold: float, total: int, transmitted: int, mae_value=None) -> "Metrics":
        return cls(
            float(threshold), int(total), int(transmitted), int(total - transmitted),
            data_reduction(total, transmitted), mae_value,
        )

    @classmethod
    def from_log(cls, threshold: float, log: TransmissionLog) -> "Metrics":
        """In-loop metrics; MAE covers every step that carried a forecast."""
        preds, actual = log.predicted_pairs()
        value = mae(preds, actual) if preds.size else None
        return cls.from_counts(threshold, log.total, log.transmitted, value)

    def to_dict(self) -> dict:
        return asdict(self)
