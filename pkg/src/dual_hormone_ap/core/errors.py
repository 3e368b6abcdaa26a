"""Custom exceptions and error formatting for dual-hormone-ap."""

from __future__ import annotations


class ModelEvaluationError(Exception):
    """Raised when a model vector field produces a non-finite component."""

    def __init__(self, component: str, message: str = "non-finite value") -> None:
        """Initialize ModelEvaluationError.

        Args:
            component: Name of the offending state or flux (e.g. "Q1", "FR").
            message: Description of the error.
        """
        self.component = component
        self.message = message
        super().__init__(f"Model evaluation failed in {component}: {message}")


class IntegrationError(Exception):
    """Raised when an integrator stage evaluates to a non-finite vector."""

    def __init__(self, stage: int, message: str = "non-finite stage") -> None:
        """Initialize IntegrationError.

        Args:
            stage: 1-based index of the failing Runge-Kutta stage.
            message: Description of the error.
        """
        self.stage = stage
        self.message = message
        super().__init__(f"Integration failed at stage {stage}: {message}")


class FilterDivergenceError(Exception):
    """Raised when the CD-EKF covariance grows past its trace cap."""

    def __init__(self, trace: float, cap: float, sample_index: int | None = None) -> None:
        """Initialize FilterDivergenceError.

        Args:
            trace: Trace of the offending covariance matrix.
            cap: Configured trace cap.
            sample_index: Index of the sample being processed, when known.
        """
        self.trace = trace
        self.cap = cap
        self.sample_index = sample_index
        where = f" at sample {sample_index}" if sample_index is not None else ""
        super().__init__(
            f"Filter diverged{where}: covariance trace {trace:.3g} exceeds {cap:.3g}"
        )


class InnovationVarianceError(Exception):
    """Raised when the innovation variance Re is not strictly positive."""

    def __init__(self, variance: float) -> None:
        """Initialize InnovationVarianceError.

        Args:
            variance: The offending innovation variance.
        """
        self.variance = variance
        super().__init__(f"Innovation variance must be positive, got {variance:.3g}")


class EstimationError(Exception):
    """Raised when every optimizer start of a parameter estimation fails."""

    def __init__(
        self, patient_id: str, message: str, diagnostics: dict[str, object] | None = None
    ) -> None:
        """Initialize EstimationError.

        Args:
            patient_id: Identifier of the patient being identified.
            message: Description of the error.
            diagnostics: Per-start details (final values, iterations).
        """
        self.patient_id = patient_id
        self.message = message
        self.diagnostics = diagnostics or {}
        super().__init__(f"Estimation failed for {patient_id}: {message}")


class SolverError(Exception):
    """Raised when the SQP solver cannot produce a usable iterate."""

    def __init__(self, status: str, message: str) -> None:
        """Initialize SolverError.

        Args:
            status: Short machine-readable status ("qp_failure", "non_finite").
            message: Description of the error.
        """
        self.status = status
        self.message = message
        super().__init__(f"OCP solver failed ({status}): {message}")


class DatasetError(Exception):
    """Raised when an identification dataset is malformed."""

    def __init__(self, source: str, message: str) -> None:
        """Initialize DatasetError.

        Args:
            source: Path or label of the dataset.
            message: Description of the problem.
        """
        self.source = source
        self.message = message
        super().__init__(f"Invalid dataset {source}: {message}")


class ConfigError(Exception):
    """Raised when a configuration or parameter file is invalid."""

    def __init__(self, key: str, message: str) -> None:
        """Initialize ConfigError.

        Args:
            key: Offending section, key or file.
            message: Description of the problem.
        """
        self.key = key
        self.message = message
        super().__init__(f"Invalid configuration for '{key}': {message}")


class PipelineError(Exception):
    """Raised when a pipeline stage fails for one or more patients."""

    def __init__(
        self, stage: str, message: str, patient_id: str | None = None, failed_count: int = 0
    ) -> None:
        """Initialize PipelineError.

        Args:
            stage: Pipeline stage ("cohort", "identify", "trial").
            message: Description of the error.
            patient_id: Patient the failure belongs to, if a single one.
            failed_count: Number of patients that failed in the stage.
        """
        self.stage = stage
        self.message = message
        self.patient_id = patient_id
        self.failed_count = failed_count
        who = f" ({patient_id})" if patient_id else ""
        super().__init__(f"{stage}{who}: {message}")

    def __reduce__(self) -> tuple[type[PipelineError], tuple[str, str, str | None, int]]:
        """Pickle by constructor arguments so the error survives worker processes."""
        return (PipelineError, (self.stage, self.message, self.patient_id, self.failed_count))


def format_error(error: Exception) -> str:
    """Format error for user display with actionable suggestion.

    Args:
        error: The exception to format.

    Returns:
        Human-readable error message with suggestion.
    """
    if isinstance(error, DatasetError):
        return (
            f"Dataset problem in {error.source}: {error.message}. "
            "Expected 5-min samples with columns t_min, cgm_mmolL, uba_mUmin, "
            "ubo_mUmin, ug_ugmin, meal_g."
        )

    if isinstance(error, ConfigError):
        return f"Configuration error: {error}. Check the config or parameter file."

    if isinstance(error, EstimationError):
        return f"{error}. Try a longer dataset or a different --seed."

    if isinstance(error, FilterDivergenceError):
        return f"{error}. The model or its initial state is far from the data."

    if isinstance(error, SolverError):
        return f"{error}. The open-loop fallback was used for this interval."

    if isinstance(error, ModelEvaluationError | IntegrationError):
        return f"Numerical failure: {error}. Check the parameter set and step sizes."

    if isinstance(error, InnovationVarianceError):
        return f"Numerical failure: {error}. R must be positive."

    if isinstance(error, PipelineError):
        if error.failed_count > 0:
            return f"Stage {error.stage} failed: {error.message} ({error.failed_count} failed)"
        return f"Stage {error.stage} failed: {error}"

    if isinstance(error, FileNotFoundError):
        return f"File not found: {error}. Check that the path exists."

    if isinstance(error, PermissionError):
        return f"Permission denied: {error}. Check file permissions."

    if isinstance(error, OSError):
        if "No space left" in str(error):
            return "Insufficient disk space. Free up space and retry."
        return f"System error: {error}"

    return f"Unexpected error: {error}"
