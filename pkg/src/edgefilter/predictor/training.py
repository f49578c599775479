from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from edgefilter.ingest import SourceKind, WindowSet
from edgefilter.predictor.lstm import _loss_grad, predict_batch
from edgefilter.predictor.optim import AdamState, adam_step
from edgefilter.predictor.params import LstmParams, ModelWeights, init_params
from edgefilter.rng import Stream, generator

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class TrainingDiverged(ArithmeticError):
    """Loss became non-finite; ``report`` covers the completed epochs."""

    def __init__(self, message: str, report: "TrainReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 32
    max_epochs: int = 100
    dropout: float = 0.2
    patience_stop: int = 10
    patience_decay: int = 5
    decay_factor: float = 0.5
    min_lr: float = 1e-5
    seed: int = 0
    val_frac: float = 0.1
    hidden: int = 64

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigError(f"decay_factor must be in (0, 1), got {self.decay_factor}")
        if not self.min_lr > 0:
            raise ConfigError("min_lr must be positive")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.batch_size < 1 or self.hidden < 1:
            raise ConfigError("batch_size and hidden must be positive")
        if self.max_epochs < 0 or self.patience_stop < 1 or self.patience_decay < 1:
            raise ConfigError("max_epochs must be >= 0 and patience values >= 1")
        if not 0.0 < self.val_frac < 1.0:
            raise ConfigError("val_frac must lie in (0, 1)")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown training config key(s): {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    initial_val_mse: float = float("nan")
    best_epoch: int = 0
    stop_epoch: int = 0
    final_lr: float = float("nan")

    @property
    def best_val_mse(self) -> float:
        return min(self.val_mse) if self.val_mse else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_val_mse"] = self.best_val_mse
        return d


class PlateauSchedule:
    """Early stopping plus learning-rate decay on a validation metric.

    ``update`` is fed one validation loss per epoch. A strictly lower loss
    counts as an improvement. After ``patience_decay`` consecutive stagnant
    epochs the rate is multiplied by ``decay_factor`` (floored at ``min_lr``)
    and the decay counter restarts; after ``patience_stop`` stagnant epochs
    training stops.
    """

    def __init__(self, lr, patience_stop, patience_decay, decay_factor, min_lr):
        self.lr = lr
        self.patience_stop = patience_stop
        self.patience_decay = patience_decay
        self.decay_factor = decay_factor
        self.min_lr = min_lr
        self.best = float("inf")
        self.best_epoch = 0
        self.epoch = 0
        self._since_best = 0
        self._since_decay = 0

    def update(self, val_loss: float) -> tuple[bool, bool]:
        """Returns ``(improved, stop)``; may change ``self.lr``."""
        self.epoch += 1
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self.epoch
            self._since_best = 0
            self._since_decay = 0
            return True, False
        self._since_best += 1
        self._since_decay += 1
        if self._since_decay >= self.patience_decay:
            self.lr = max(self.lr * self.decay_factor, self.min_lr)
            self._since_decay = 0
        return False, self._since_best >= self.patience_stop


def _mse(X, y, params: LstmParams) -> float:
    err = predict_batch(X, params) - y
    return float(np.mean(err * err))


def train(
    train_set: WindowSet,
    val_set: WindowSet,
    cfg: TrainConfig,
    *,
    source_id: str = "",
    kind: SourceKind | str = SourceKind.IN_SITU,
    on_epoch: Callable[[int, float, float, float], None] | None = None,
) -> tuple[ModelWeights, TrainReport]:
    """Mini-batch Adam training on normalized windows.

    Batches are contiguous chronological chunks of ``train_set``; the order
    in which chunks are visited is reshuffled every epoch. Returns the
    weights of the epoch with the lowest validation MSE.
    """
    if cfg.max_epochs < 1:
        raise ConfigError("empty training: max_epochs must be >= 1")
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("training and validation sets must be nonempty")
    if train_set.k != val_set.k:
        raise ConfigError("training and validation windows differ in length")
    if train_set.stats is None:
        raise ConfigError("training windows carry no normalization statistics")

    params = init_params(cfg.hidden, 1, train_set.k, cfg.seed)
    H = cfg.hidden
    # flat parameter vector with views per block
    theta = params.flat().copy()
    sizes = [4 * H, 4 * H * H, 4 * H, H, 1]
    offs = np.cumsum([0, *sizes])
    W = theta[offs[0] : offs[1]].reshape(4 * H, 1)
    U = theta[offs[1] : offs[2]].reshape(4 * H, H)
    b = theta[offs[2] : offs[3]]
    dw = theta[offs[3] : offs[4]]
    db = theta[offs[4] : offs[5]]

    X = train_set.inputs[:, :, None]
    y = train_set.targets
    Xv, yv = val_set.inputs, val_set.targets
    n = len(y)
    starts = np.arange(0, n, cfg.batch_size)

    shuffle_rng = generator(cfg.seed, Stream.SHUFFLE)
    dropout_rng = generator(cfg.seed, Stream.DROPOUT)
    keep = 1.0 - cfg.dropout

    report = TrainReport(initial_val_mse=_mse(Xv, yv, params))
    sched = PlateauSchedule(cfg.lr, cfg.patience_stop, cfg.patience_decay, cfg.decay_factor, cfg.min_lr)
    adam = AdamState.zeros_like(theta)
    best_theta = theta.copy()
    step = 0

    for epoch in range(1, cfg.max_epochs + 1):
        lr = sched.lr
        total = 0.0
        for s in shuffle_rng.permutation(starts):
            xb, yb = X[s : s + cfg.batch_size], y[s : s + cfg.batch_size]
            mask = None
            if cfg.dropout > 0:
                mask = (dropout_rng.random((len(yb), H)) < keep) / keep
            loss, (gW, gU, gb, gdw, gdb) = _loss_grad(xb, yb, W, U, b, dw, db[0], mask)
            if not np.isfinite(loss):
                report.stop_epoch, report.final_lr = epoch, lr
                raise TrainingDiverged(f"non-finite training loss in epoch {epoch}", report)
            grads = np.concatenate([gW.ravel(), gU.ravel(), gb, gdw, [gdb]])
            step += 1
            theta[:], adam = adam_step(theta, grads, adam, step, lr)
            total += loss * len(yb)

        val = _mse(Xv, yv, params.with_flat(theta)) if np.all(np.isfinite(theta)) else float("nan")
        if not np.isfinite(val):
            report.stop_epoch, report.final_lr = epoch, lr
            raise TrainingDiverged(f"non-finite validation loss in epoch {epoch}", report)
        report.train_mse.append(total / n)
        report.val_mse.append(val)
        report.lr.append(lr)
        improved, stop = sched.update(val)
        if improved:
            best_theta = theta.copy()
        log.debug("epoch %d train_mse=%.6g val_mse=%.6g lr=%.3g", epoch, total / n, val, lr)
        if on_epoch is not None:
            on_epoch(epoch, total / n, val, lr)
        if stop:
            break

    report.best_epoch = sched.best_epoch
    report.stop_epoch = epoch
    report.final_lr = sched.lr
    weights = ModelWeights(
        params.with_flat(best_theta), train_set.stats, source_id=source_id, kind=kind, seed=cfg.seed
    )
    return weights, report
