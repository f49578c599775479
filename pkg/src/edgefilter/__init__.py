"""Predictive edge filtering of sensor streams.

An edge device forecasts each reading with a small LSTM and transmits only
readings whose forecast error exceeds a tolerance; a cloud-side mirror of
the same model reconstructs the suppressed readings.
"""

from edgefilter.filter import (
    BufferPolicy,
    Decision,
    DesyncError,
    FilterConfig,
    FilterError,
    FilterState,
    ReconstructedSeries,
    StepOutcome,
    SyncMode,
    TransmissionLog,
    cloud_step,
    edge_step,
    pad_buffer,
    run_session,
)
from edgefilter.ingest import (
    NormStats,
    SeriesFrame,
    SourceKind,
    WindowSet,
    chrono_split,
    fit_norm,
    make_windows,
    parse_csv,
    resample,
)
from edgefilter.predictor import (
    LSTMForecaster,
    ModelWeights,
    PersistenceForecaster,
    PersistenceModel,
    TrainConfig,
    load_weights,
    save_weights,
    train,
)

__version__ = "0.1.0"
