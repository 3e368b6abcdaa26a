"""Maximum-likelihood identification of the control model from CGM data.

The negative log-likelihood is built from CD-EKF innovations and minimized with
multi-start Nelder-Mead over log-transformed positive parameters.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import OptimizeResult, minimize

from dual_hormone_ap.config import EstimatorSettings, FilterSettings
from dual_hormone_ap.core.errors import (
    ConfigError,
    EstimationError,
    FilterDivergenceError,
    InnovationVarianceError,
    IntegrationError,
    ModelEvaluationError,
)
from dual_hormone_ap.core.paths import write_json
from dual_hormone_ap.estimation.cdekf import FilterTrace, InnovationRecord, filter_pass, initial_covariance
from dual_hormone_ap.estimation.dataset import IdDataset
from dual_hormone_ap.models.mvp import (
    CTRL_STATE_SIZE,
    CtrlIndex,
    CtrlParams,
    ctrl_drift,
    logsi_for_glucose,
)
from dual_hormone_ap.models.params_io import params_from_dict, params_to_dict
from dual_hormone_ap.numerics.integrators import Vector, rk4_step

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# Leading entries of the optimization vector that enter as logarithms.
_LOG_COUNT = 8


@dataclass(frozen=True)
class Theta:
    """Identified parameters plus the estimated initial states."""

    k_m: float
    tau_d: float
    v_g: float
    egp: float
    sigma_g: float
    sigma_si: float
    g0: float
    gi0: float
    logsi0: float

    def to_vector(self) -> Vector:
        """Unconstrained optimization vector."""
        positive = [self.k_m, self.tau_d, self.v_g, self.egp, self.sigma_g, self.sigma_si, self.g0, self.gi0]
        return np.array([*np.log(positive), self.logsi0])

    @classmethod
    def from_vector(cls, z: Vector) -> Theta:
        """Inverse of to_vector."""
        values = np.exp(z[:_LOG_COUNT])
        return cls(*(float(v) for v in values), logsi0=float(z[_LOG_COUNT]))

    @classmethod
    def initial_guess(cls, fixed: CtrlParams, data: IdDataset) -> Theta:
        """Start from the fixed parameter values and the first CGM reading."""
        y0 = max(float(data.cgm[0]), 0.5)
        return cls(
            k_m=fixed.k_m,
            tau_d=fixed.tau_d,
            v_g=fixed.v_g,
            egp=fixed.egp,
            sigma_g=max(fixed.sigma_g, 1e-4),
            sigma_si=max(fixed.sigma_si, 1e-4),
            g0=y0,
            gi0=y0,
            logsi0=logsi_for_glucose(fixed, float(data.basal[0]), y0),
        )

    def apply(self, fixed: CtrlParams) -> CtrlParams:
        """Fixed parameters with the identified subset substituted."""
        return replace(
            fixed,
            k_m=self.k_m,
            tau_d=self.tau_d,
            v_g=self.v_g,
            egp=self.egp,
            sigma_g=self.sigma_g,
            sigma_si=self.sigma_si,
        )


def initial_state(theta: Theta, params: CtrlParams, basal: float) -> Vector:
    """x̂0: insulin chain at basal steady state, meal and glucagon chains empty."""
    ip = basal / params.c_i
    x0 = np.zeros(CTRL_STATE_SIZE)
    x0[CtrlIndex.ISC] = ip
    x0[CtrlIndex.IP] = ip
    x0[CtrlIndex.IEFF] = math.exp(theta.logsi0) * ip
    x0[CtrlIndex.G] = theta.g0
    x0[CtrlIndex.LOGSI] = theta.logsi0
    x0[CtrlIndex.GI] = theta.gi0
    return x0


def negative_log_likelihood(records: Sequence[InnovationRecord]) -> float:
    """Gaussian negative log-likelihood of a scalar innovation sequence."""
    n = len(records)
    total = 0.5 * n * LOG_2PI
    for r in records:
        total += 0.5 * (math.log(r.variance) + r.error * r.error / r.variance)
    return total


@dataclass
class LikelihoodProblem:
    """NLL of one dataset as a function of the optimization vector."""

    data: IdDataset
    fixed: CtrlParams
    filter_settings: FilterSettings = field(default_factory=FilterSettings)
    sentinel: float = 1e10
    step: float = 2.5
    sample_time: float = 5.0
    evaluations: int = 0

    def __post_init__(self) -> None:
        """Cache the input matrix and meal rates."""
        self._inputs = self.data.inputs
        self._meals = self.data.meal_rates(self.sample_time)
        self._p0 = initial_covariance(self.filter_settings)

    def nll(self, theta: Theta) -> float:
        """NLL at ``theta``; the sentinel when the filter fails."""
        self.evaluations += 1
        try:
            params = theta.apply(self.fixed)
            x0 = initial_state(theta, params, float(self.data.basal[0]))
            result = filter_pass(
                self.data.cgm,
                self._inputs,
                self._meals,
                params,
                x0,
                self._p0,
                sample_time=self.sample_time,
                settings=self.filter_settings,
                step=self.step,
                t0=float(self.data.t[0]),
            )
        except (
            FilterDivergenceError,
            InnovationVarianceError,
            IntegrationError,
            ModelEvaluationError,
            ConfigError,
            FloatingPointError,
            OverflowError,
        ) as e:
            logger.debug("NLL evaluation failed: %s", e)
            return self.sentinel
        value = negative_log_likelihood(result.records)
        return value if math.isfinite(value) else self.sentinel

    def __call__(self, z: Vector) -> float:
        """NLL at an optimization vector."""
        if not np.all(np.isfinite(z)) or np.any(np.abs(z[:_LOG_COUNT]) > 50):
            return self.sentinel
        return self.nll(Theta.from_vector(z))


@dataclass(frozen=True)
class IdentifiedModel:
    """Control model identified for one patient.

    Attributes:
        patient_id: Patient the data came from.
        params: Control-model parameters (fixed plus identified).
        x0: Estimated initial state.
        logsi0: Estimated initial log insulin sensitivity, the clipping centre.
        metadata: Data span, final NLL, iterations and convergence.
    """

    patient_id: str
    params: CtrlParams
    x0: Vector
    logsi0: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation."""
        return {
            "patient_id": self.patient_id,
            "params": params_to_dict(self.params),
            "initial_state": {idx.name: float(self.x0[idx]) for idx in CtrlIndex},
            "logSI_0": self.logsi0,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], source: str = "<identified>") -> IdentifiedModel:
        """Inverse of to_dict.

        Raises:
            ConfigError: If a field is missing.
        """
        try:
            state = data["initial_state"]
            x0 = np.array([float(state[idx.name]) for idx in CtrlIndex])
            return cls(
                patient_id=str(data["patient_id"]),
                params=params_from_dict(CtrlParams, data["params"], source=source),
                x0=x0,
                logsi0=float(data["logSI_0"]),
                metadata=dict(data.get("metadata", {})),
            )
        except KeyError as e:
            raise ConfigError(f"{source}:{e.args[0]}", "missing field") from e

    def save(self, path: Path) -> Path:
        """Write as JSON."""
        return write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: Path) -> IdentifiedModel:
        """Read a file written by save."""
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(str(path), f"not valid JSON ({e.msg})") from e
        return cls.from_dict(data, source=str(path))


@dataclass
class EstimationResult:
    """Outcome of a multi-start estimation.

    Attributes:
        theta: Best parameters found.
        params: Control-model parameters with ``theta`` applied.
        x0: Initial state implied by ``theta``.
        nll: Final negative log-likelihood.
        iterations: Optimizer iterations of the best start.
        converged: Whether the best start met its tolerances.
        history: Best NLL after each iteration of the best start.
        starts: Per-start diagnostics.
    """

    theta: Theta
    params: CtrlParams
    x0: Vector
    nll: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)
    starts: list[dict[str, Any]] = field(default_factory=list)

    def to_identified(self, patient_id: str, data: IdDataset, config_hash: str = "") -> IdentifiedModel:
        """Package the result for the controller, stamped with the run config hash."""
        return IdentifiedModel(
            patient_id=patient_id,
            params=self.params,
            x0=self.x0,
            logsi0=self.theta.logsi0,
            metadata={
                "data_span_min": data.span,
                "samples": data.size,
                "nll": self.nll,
                "iterations": self.iterations,
                "converged": self.converged,
                "config_hash": config_hash,
            },
        )


def _recorder(sink: list[float]) -> Callable[[OptimizeResult], None]:
    def record(intermediate_result: OptimizeResult) -> None:
        sink.append(float(intermediate_result.fun))

    return record


def _perturbed_start(base: Vector, rng: np.random.Generator, spread: float) -> Vector:
    z = base.copy()
    z[:_LOG_COUNT] += rng.uniform(-math.log1p(spread), math.log1p(spread), size=_LOG_COUNT)
    z[_LOG_COUNT] += rng.uniform(-spread, spread)
    return z


def estimate(
    data: IdDataset,
    fixed: CtrlParams,
    theta_init: Theta | None = None,
    settings: EstimatorSettings | None = None,
    filter_settings: FilterSettings | None = None,
    step: float = 2.5,
    sample_time: float = 5.0,
    seed: int = 0,
    patient_id: str = "patient",
) -> EstimationResult:
    """Minimize the NLL from several starts and keep the best.

    The first start is ``theta_init``; the rest perturb it in log space.

    Raises:
        EstimationError: If every start ends at the divergence sentinel.
    """
    settings = settings or EstimatorSettings()
    problem = LikelihoodProblem(
        data=data,
        fixed=fixed,
        filter_settings=filter_settings or FilterSettings(),
        sentinel=settings.divergence_sentinel,
        step=step,
        sample_time=sample_time,
    )
    theta_init = theta_init or Theta.initial_guess(fixed, data)
    base = theta_init.to_vector()
    rng = np.random.default_rng(seed)

    best: tuple[OptimizeResult, list[float]] | None = None
    starts: list[dict[str, Any]] = []
    for i in range(settings.restarts):
        z0 = base if i == 0 else _perturbed_start(base, rng, settings.perturbation)
        history: list[float] = []
        result = minimize(
            problem,
            z0,
            method="Nelder-Mead",
            callback=_recorder(history),
            options={
                "maxiter": settings.max_iterations,
                "xatol": settings.xatol,
                "fatol": settings.fatol,
                "adaptive": True,
            },
        )
        starts.append({"start": i, "nll": float(result.fun), "iterations": int(result.nit), "success": bool(result.success)})
        logger.debug("%s start %d: NLL %.4f after %d iterations", patient_id, i, result.fun, result.nit)
        if result.fun < settings.divergence_sentinel and (best is None or result.fun < best[0].fun):
            best = (result, history)

    if best is None:
        raise EstimationError(patient_id, "every optimizer start diverged", {"starts": starts})

    result, history = best
    theta = Theta.from_vector(result.x)
    params = theta.apply(fixed)
    x0 = initial_state(theta, params, float(data.basal[0]))
    if not result.success:
        logger.warning("%s: estimation stopped at the iteration cap (NLL %.4f)", patient_id, result.fun)
    logger.info("%s identified: NLL %.4f, %d evaluations", patient_id, result.fun, problem.evaluations)

    return EstimationResult(
        theta=theta,
        params=params,
        x0=x0,
        nll=float(result.fun),
        iterations=int(result.nit),
        converged=bool(result.success),
        history=history,
        starts=starts,
    )


def simulate_deterministic(
    params: CtrlParams, x0: Vector, data: IdDataset, step: float = 2.5, sample_time: float = 5.0
) -> Vector:
    """Noise-free prediction of GI at every sample of ``data``."""
    inputs = data.inputs
    meals = data.meal_rates(sample_time)
    steps = max(1, round(sample_time / step))
    h = sample_time / steps
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty(data.size)
    for k in range(data.size):
        out[k] = x[CtrlIndex.GI]
        if k == data.size - 1:
            break
        u, d = inputs[k], float(meals[k])
        for _ in range(steps):
            x = rk4_step(lambda _t, z, u=u, d=d: ctrl_drift(z, u, d, params), 0.0, x, h)
    return out


def rmse(predicted: Vector, observed: Vector) -> float:
    """Root-mean-square error."""
    return float(np.sqrt(np.mean((np.asarray(predicted) - np.asarray(observed)) ** 2)))


def filter_trace(
    model: IdentifiedModel,
    data: IdDataset,
    filter_settings: FilterSettings | None = None,
    step: float = 2.5,
    sample_time: float = 5.0,
) -> FilterTrace:
    """Replay the CD-EKF over ``data`` with an identified model, keeping per-sample rows.

    Raises:
        FilterDivergenceError: If the replay diverges.
    """
    settings = filter_settings or FilterSettings()
    trace = FilterTrace()
    filter_pass(
        data.cgm,
        data.inputs,
        data.meal_rates(sample_time),
        model.params,
        model.x0,
        initial_covariance(settings),
        sample_time=sample_time,
        settings=settings,
        step=step,
        trace=trace,
        t0=float(data.t[0]),
    )
    return trace
