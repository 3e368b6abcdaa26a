"""Estimation - CD-EKF, identification datasets and maximum-likelihood fitting."""

from dual_hormone_ap.estimation.cdekf import (
    CdEkf,
    FilterBelief,
    FilterHooks,
    FilterModel,
    FilterPassResult,
    FilterTrace,
    InnovationRecord,
    ctrl_filter_model,
    filter_pass,
    initial_covariance,
    predict_belief,
    update_belief,
)
from dual_hormone_ap.estimation.dataset import (
    COLUMNS,
    MIN_SAMPLES,
    IdDataset,
    load_dataset,
    save_dataset,
)
from dual_hormone_ap.estimation.scenario import (
    DEFAULT_ID_MEALS,
    generate_ctrl_dataset,
    generate_id_dataset,
    meal_bolus_rate,
)
from dual_hormone_ap.estimation.sysid import (
    EstimationResult,
    IdentifiedModel,
    LikelihoodProblem,
    Theta,
    estimate,
    filter_trace,
    initial_state,
    negative_log_likelihood,
    rmse,
    simulate_deterministic,
)

__all__ = [
    "COLUMNS",
    "DEFAULT_ID_MEALS",
    "MIN_SAMPLES",
    "CdEkf",
    "EstimationResult",
    "FilterBelief",
    "FilterHooks",
    "FilterModel",
    "FilterPassResult",
    "FilterTrace",
    "IdDataset",
    "IdentifiedModel",
    "InnovationRecord",
    "LikelihoodProblem",
    "Theta",
    "ctrl_filter_model",
    "estimate",
    "filter_pass",
    "filter_trace",
    "generate_ctrl_dataset",
    "generate_id_dataset",
    "initial_covariance",
    "initial_state",
    "load_dataset",
    "meal_bolus_rate",
    "negative_log_likelihood",
    "predict_belief",
    "rmse",
    "save_dataset",
    "simulate_deterministic",
    "update_belief",
]
