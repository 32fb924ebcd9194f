"""Ensemble prediction variation and its estimation from neuron activations."""

from ._varest import (
    ConfigError,
    InputError,
    TrainingError,
    VarestError,
    assign_bucket,
    auc,
    bucketize,
    delta_ratio,
    dist_pv,
    grad_check,
    load_pv_table,
    pearson,
    regression_metrics,
    round_rating,
    run_cli,
    seed_bundles,
    setting_sources,
    value_pv,
)

__all__ = [
    "ConfigError",
    "InputError",
    "TrainingError",
    "VarestError",
    "assign_bucket",
    "auc",
    "bucketize",
    "delta_ratio",
    "dist_pv",
    "grad_check",
    "load_pv_table",
    "pearson",
    "regression_metrics",
    "round_rating",
    "run_cli",
    "seed_bundles",
    "setting_sources",
    "value_pv",
]
