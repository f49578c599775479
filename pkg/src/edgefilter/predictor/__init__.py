from edgefilter.predictor.baseline import PersistenceModel, persistence_predict
from edgefilter.predictor.estimator import LSTMForecaster, PersistenceForecaster, sliding_windows
from edgefilter.predictor.lstm import (
    NumericalError,
    cell_step,
    forward,
    forward_normalized,
    loss_and_grads,
    predict_batch,
)
from edgefilter.predictor.optim import AdamState, adam_step
from edgefilter.predictor.params import (
    FORMAT_VERSION,
    DimensionError,
    LstmParams,
    ModelWeights,
    init_params,
    param_count,
)
from edgefilter.predictor.serialization import (
    WeightFileError,
    WeightVersionError,
    dumps_weights,
    load_weights,
    save_weights,
)
from edgefilter.predictor.training import (
    ConfigError,
    PlateauSchedule,
    TrainConfig,
    TrainingDiverged,
    TrainReport,
    train,
)

__all__ = [
    "AdamState",
    "ConfigError",
    "DimensionError",
    "FORMAT_VERSION",
    "LSTMForecaster",
    "LstmParams",
    "ModelWeights",
    "NumericalError",
    "PersistenceForecaster",
    "PersistenceModel",
    "PlateauSchedule",
    "TrainConfig",
    "TrainReport",
    "TrainingDiverged",
    "WeightFileError",
    "WeightVersionError",
    "adam_step",
    "cell_step",
    "dumps_weights",
    "forward",
    "forward_normalized",
    "init_params",
    "load_weights",
    "loss_and_grads",
    "param_count",
    "persistence_predict",
    "predict_batch",
    "save_weights",
    "sliding_windows",
    "train",
]
