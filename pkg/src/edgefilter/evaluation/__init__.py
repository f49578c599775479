from edgefilter.evaluation.metrics import Metrics, data_reduction, mae, round_half_up
from edgefilter.evaluation.render import render_table
from edgefilter.evaluation.scenario import (
    CacheError,
    DataRef,
    ScenarioError,
    ScenarioName,
    ScenarioReport,
    ScenarioSpec,
    SpecError,
    load_scenarios,
    open_loop_mae,
    run_scenario,
    run_scenarios,
    train_weights,
)

__all__ = [
    "CacheError",
    "DataRef",
    "Metrics",
    "ScenarioError",
    "ScenarioName",
    "ScenarioReport",
    "ScenarioSpec",
    "SpecError",
    "data_reduction",
    "load_scenarios",
    "mae",
    "open_loop_mae",
    "render_table",
    "round_half_up",
    "run_scenario",
    "run_scenarios",
    "train_weights",
]
