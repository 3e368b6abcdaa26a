"""Core utilities - errors, file naming and provenance."""

from dual_hormone_ap.core.errors import (
    ConfigError,
    DatasetError,
    EstimationError,
    FilterDivergenceError,
    IntegrationError,
    InnovationVarianceError,
    ModelEvaluationError,
    PipelineError,
    SolverError,
    format_error,
)
from dual_hormone_ap.core.paths import (
    canonical_json,
    digest,
    patient_stem,
    read_config_hash,
    write_csv,
    write_json,
)

__all__ = [
    "ConfigError",
    "DatasetError",
    "EstimationError",
    "FilterDivergenceError",
    "InnovationVarianceError",
    "IntegrationError",
    "ModelEvaluationError",
    "PipelineError",
    "SolverError",
    "canonical_json",
    "digest",
    "format_error",
    "patient_stem",
    "read_config_hash",
    "write_csv",
    "write_json",
]
