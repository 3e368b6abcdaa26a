"""Run configuration: integrator, filter, estimator, solver, dosing and trial settings.

Every section is a frozen dataclass with working defaults. A JSON config file
overrides any subset of keys, one object per section::

    {"dosing": {"bolus_allowance": 1.2}, "trial": {"cgm_noise_sd": 0.0}}
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from dual_hormone_ap.core.errors import ConfigError
from dual_hormone_ap.core.paths import digest

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "DUAL_HORMONE_AP_CONFIG"


def _require_positive(section: str, **values: float) -> None:
    for key, value in values.items():
        if not value > 0:
            raise ConfigError(f"{section}.{key}", f"must be positive, got {value}")


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed step sizes [min] for the plant and the controller model.

    Attributes:
        plant_step: Euler-Maruyama step of the simulation model.
        control_step: RK4 step of the control model (filter and NMPC).
        sample_time: Control interval Ts; both steps must divide it.
        fd_scale: Relative step of central finite differences.
    """

    plant_step: float = 0.5
    control_step: float = 2.5
    sample_time: float = 5.0
    fd_scale: float = 1e-6

    def __post_init__(self) -> None:
        """Validate step sizes."""
        _require_positive(
            "integrator",
            plant_step=self.plant_step,
            control_step=self.control_step,
            sample_time=self.sample_time,
            fd_scale=self.fd_scale,
        )
        for key, step in (("plant_step", self.plant_step), ("control_step", self.control_step)):
            ratio = self.sample_time / step
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(
                    f"integrator.{key}", f"{step} does not divide sample_time {self.sample_time}"
                )

    @property
    def plant_substeps(self) -> int:
        """Plant steps per control interval."""
        return round(self.sample_time / self.plant_step)

    @property
    def control_substeps(self) -> int:
        """Control-model steps per control interval."""
        return round(self.sample_time / self.control_step)


@dataclass(frozen=True)
class FilterSettings:
    """CD-EKF settings.

    Attributes:
        measurement_variance: CGM noise variance R [(mmol/L)^2].
        glucose_variance: Initial variance of G and GI.
        logsi_variance: Initial variance of logSI.
        other_variance: Initial variance of insulin, meal and glucagon states.
        trace_cap: Covariance trace above which the filter is declared diverged.
    """

    measurement_variance: float = 0.0625
    glucose_variance: float = 1.0
    logsi_variance: float = 0.04
    other_variance: float = 0.01
    trace_cap: float = 1e8

    def __post_init__(self) -> None:
        """Validate variances."""
        _require_positive(
            "filter",
            measurement_variance=self.measurement_variance,
            trace_cap=self.trace_cap,
        )
        for key in ("glucose_variance", "logsi_variance", "other_variance"):
            if getattr(self, key) < 0:
                raise ConfigError(f"filter.{key}", "must be nonnegative")


@dataclass(frozen=True)
class EstimatorSettings:
    """Maximum-likelihood estimation settings."""

    restarts: int = 5
    max_iterations: int = 2000
    perturbation: float = 0.3
    divergence_sentinel: float = 1e10
    xatol: float = 1e-4
    fatol: float = 1e-6

    def __post_init__(self) -> None:
        """Validate optimizer settings."""
        if self.restarts < 1:
            raise ConfigError("estimator.restarts", "at least one start is required")
        if self.max_iterations < 1:
            raise ConfigError("estimator.max_iterations", "must be >= 1")
        if self.perturbation < 0:
            raise ConfigError("estimator.perturbation", "must be nonnegative")


@dataclass(frozen=True)
class SolverSettings:
    """Multiple-shooting SQP settings.

    Attributes:
        horizon: Prediction horizon [min]; a multiple of the sample time.
        max_iterations: SQP iteration cap.
        kkt_tolerance: Scaled projected-gradient tolerance for convergence.
        regularisation: Diagonal added to the condensed Hessian.
        armijo: Sufficient-decrease constant of the line search.
        min_step: Smallest line-search step before the solve stalls.
    """

    horizon: float = 360.0
    max_iterations: int = 50
    kkt_tolerance: float = 1e-6
    regularisation: float = 1e-8
    armijo: float = 1e-4
    min_step: float = 1e-10

    def __post_init__(self) -> None:
        """Validate solver settings."""
        _require_positive(
            "solver", horizon=self.horizon, kkt_tolerance=self.kkt_tolerance
        )
        if self.max_iterations < 1:
            raise ConfigError("solver.max_iterations", "must be >= 1")
        if self.regularisation < 0:
            raise ConfigError("solver.regularisation", "must be nonnegative")


@dataclass(frozen=True)
class DosingConfig:
    """Thresholds, caps and pump resolutions of the dosing heuristics.

    Glucose values are in mmol/L, durations in minutes, doses in U or µg.
    """

    setpoint: float = 6.0
    exercise_setpoint: float = 7.0
    z_min: float = 4.5
    z_max: float = 10.0
    weight_setpoint: float = 1.0
    weight_hypo: float = 1e6
    weight_hyper: float = 50.0
    glucagon_threshold: float = 4.5
    insulin_threshold: float = 5.0
    exercise_glucagon_threshold: float = 7.0
    exercise_hysteresis: float = 0.5
    meal_window: float = 60.0
    correction_threshold: float = 10.0
    bolus_allowance: float = 1.15
    epsilon: float = 1e-3
    bolus_window: int = 11
    glucagon_window: int = 23
    glucagon_cap: float = 300.0
    exercise_glucagon_dose: float = 100.0
    fallback_basal_threshold: float = 8.0
    fallback_glucagon_dose: float = 15.0
    basal_resolution: float = 0.01
    bolus_resolution: float = 0.1
    glucagon_resolution: float = 0.01
    logsi_clip: float = 1.0

    def __post_init__(self) -> None:
        """Validate heuristic constants."""
        if self.glucagon_threshold >= self.insulin_threshold:
            raise ConfigError(
                "dosing.glucagon_threshold", "must lie below insulin_threshold"
            )
        if self.z_min >= self.z_max:
            raise ConfigError("dosing.z_min", "must lie below z_max")
        if self.bolus_window < 1 or self.glucagon_window < 1:
            raise ConfigError("dosing.bolus_window", "history windows must be >= 1")
        _require_positive(
            "dosing",
            epsilon=self.epsilon,
            exercise_hysteresis=self.exercise_hysteresis,
            glucagon_cap=self.glucagon_cap,
            basal_resolution=self.basal_resolution,
            bolus_resolution=self.bolus_resolution,
            glucagon_resolution=self.glucagon_resolution,
        )


@dataclass(frozen=True)
class TrialSettings:
    """Virtual clinical trial settings.

    Attributes:
        cgm_noise_sd: Stationary SD of the AR(1) CGM error [mmol/L].
        cgm_ar: AR(1) coefficient of the CGM error.
        cgm_floor: Lowest reportable CGM value [mmol/L].
        exercise_hr_increase: Heart-rate rise above rest during exercise [BPM].
        plant_diffusion: Optional diffusion on the plant's Q1 [mmol/sqrt(min)].
        cohort_spread: Log-normal SD applied to every positive patient parameter.
        isf: Insulin sensitivity factor [(mmol/L)/U].
        target_glucose: Fasting glucose the nominal basal is solved for [mmol/L].
    """

    cgm_noise_sd: float = 0.25
    cgm_ar: float = 0.7
    cgm_floor: float = 0.1
    exercise_hr_increase: float = 50.0
    plant_diffusion: float = 0.0
    cohort_spread: float = 0.2
    isf: float = 2.0
    target_glucose: float = 6.0

    def __post_init__(self) -> None:
        """Validate trial settings."""
        if not 0 <= self.cgm_ar < 1:
            raise ConfigError("trial.cgm_ar", "must lie in [0, 1)")
        for key in ("cgm_noise_sd", "plant_diffusion", "cohort_spread"):
            if getattr(self, key) < 0:
                raise ConfigError(f"trial.{key}", "must be nonnegative")
        _require_positive("trial", isf=self.isf, target_glucose=self.target_glucose)


@dataclass(frozen=True)
class RunConfig:
    """All tunable settings of a pipeline run."""

    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    filter: FilterSettings = field(default_factory=FilterSettings)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    dosing: DosingConfig = field(default_factory=DosingConfig)
    trial: TrialSettings = field(default_factory=TrialSettings)

    def __post_init__(self) -> None:
        """Check cross-section consistency."""
        ratio = self.solver.horizon / self.integrator.sample_time
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("solver.horizon", "must be a multiple of the sample time")

    @property
    def horizon_intervals(self) -> int:
        """Number of control intervals N in the prediction horizon."""
        return round(self.solver.horizon / self.integrator.sample_time)

    def to_dict(self) -> dict[str, Any]:
        """Plain-dict view used for hashing and manifests."""
        return asdict(self)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON rendering of this config."""
        return digest(self.to_dict())


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from a partial nested dict, rejecting unknown keys.

    Args:
        data: Mapping of section name to a mapping of overrides.

    Returns:
        The merged configuration.

    Raises:
        ConfigError: On unknown sections or keys, or invalid values.
    """
    defaults = RunConfig()
    sections: dict[str, Any] = {}
    known = {f.name for f in fields(RunConfig)}

    for name, overrides in data.items():
        if name not in known:
            raise ConfigError(name, "unknown section")
        if not isinstance(overrides, dict):
            raise ConfigError(name, "section must be a JSON object")
        current = getattr(defaults, name)
        allowed = {f.name: f for f in fields(current)}
        for key in overrides:
            if key not in allowed:
                raise ConfigError(f"{name}.{key}", "unknown key")
        try:
            sections[name] = replace(current, **overrides)
        except TypeError as e:
            raise ConfigError(name, str(e)) from e

    return replace(defaults, **sections)


def load_config(path: Path | None = None) -> RunConfig:
    """Load a run configuration.

    Args:
        path: JSON file to read. When None the ``DUAL_HORMONE_AP_CONFIG``
            environment variable is consulted, then the defaults are used.

    Returns:
        The resolved RunConfig.

    Raises:
        ConfigError: If the file is missing, unreadable or invalid.
    """
    if path is None:
        env_path = os.environ.get(CONFIG_ENV_VAR)
        if not env_path:
            return RunConfig()
        path = Path(env_path)

    if not path.is_file():
        raise ConfigError(str(path), "config file not found")

    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(str(path), f"not valid JSON ({e.msg} at line {e.lineno})") from e

    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a JSON object")

    config = config_from_dict(data)
    logger.debug("Loaded config %s (hash %s)", path, config.config_hash[:12])
    return config
