"""scikit-learn compatible wrappers around the forecasters.

Both estimators take ``X`` of shape ``(n_samples, window)`` holding raw
readings in physical units and predict the next reading.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from edgefilter.ingest import WindowSet, chrono_split, fit_norm
from edgefilter.predictor.lstm import forward
from edgefilter.predictor.params import ModelWeights
from edgefilter.predictor.training import TrainConfig, train


def sliding_windows(values, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(X, y)`` pairs from a gap-free 1-D series."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) <= k:
        raise ValueError(f"series of length {len(values)} is too short for window {k}")
    view = np.lib.stride_tricks.sliding_window_view(values, k + 1)
    return view[:, :k].copy(), view[:, k].copy()


class LSTMForecaster(RegressorMixin, BaseEstimator):
    """One-step-ahead LSTM regressor.

    Normalization statistics are estimated from ``y`` at fit time and
    travel with the fitted weights. The last ``val_frac`` of the samples
    (in the given order) is held out for early stopping.
    """

    def __init__(
        self,
        hidden=64,
        lr=0.001,
        batch_size=32,
        max_epochs=100,
        dropout=0.2,
        patience_stop=10,
        patience_decay=5,
        decay_factor=0.5,
        min_lr=1e-5,
        val_frac=0.1,
        seed=0,
    ):
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.dropout = dropout
        self.patience_stop = patience_stop
        self.patience_decay = patience_decay
        self.decay_factor = decay_factor
        self.min_lr = min_lr
        self.val_frac = val_frac
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(**{k: v for k, v in self.get_params().items()})

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        cfg = self._train_config()
        stats = fit_norm(y)
        k = X.shape[1]
        windows = WindowSet(
            stats.normalize(X), stats.normalize(y), k, np.arange(len(y), dtype=np.int64), stats
        )
        tr, va = chrono_split(windows, 1.0 - cfg.val_frac)
        self.weights_, self.train_report_ = train(tr, va, cfg)
        self.n_features_in_ = k
        return self

    @classmethod
    def from_weights(cls, weights: ModelWeights) -> "LSTMForecaster":
        est = cls(hidden=weights.params.hidden_size, seed=weights.seed or 0)
        est.weights_ = weights
        est.n_features_in_ = weights.window
        return est

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, model window is {self.n_features_in_}")
        norm = self.weights_.norm
        return np.array([forward(norm.normalize(row), self.weights_) for row in X])


class PersistenceForecaster(RegressorMixin, BaseEstimator):
    """Predicts the last value of each window."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        return X[:, -1].copy()
