"""Continuous-discrete extended Kalman filter.

Mean and covariance are propagated jointly with fixed-step RK4 on
``dx/dt = f(x)`` and ``dP/dt = A P + P Aᵀ + σσᵀ``; measurement updates use the
Joseph form. Covariances are re-symmetrized after every step.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import pandas as pd

from dual_hormone_ap.config import FilterSettings
from dual_hormone_ap.core.errors import FilterDivergenceError, InnovationVarianceError
from dual_hormone_ap.models.mvp import (
    CTRL_STATE_SIZE,
    CtrlIndex,
    CtrlParams,
    ctrl_diffusion,
    ctrl_drift,
    ctrl_jacobians,
    output_jacobian,
)
from dual_hormone_ap.numerics.differentiation import fd_jacobian
from dual_hormone_ap.numerics.integrators import Matrix, Vector, rk4_step

logger = logging.getLogger(__name__)


@dataclass
class FilterBelief:
    """Gaussian belief about the state at time ``t``."""

    mean: Vector
    cov: Matrix
    t: float = 0.0

    def copy(self) -> FilterBelief:
        """Deep copy."""
        return FilterBelief(self.mean.copy(), self.cov.copy(), self.t)


@dataclass(frozen=True)
class InnovationRecord:
    """One-step prediction and its error at a sample time.

    Attributes:
        error: Innovation e = y - ŷ [mmol/L].
        variance: Innovation variance Re [(mmol/L)^2].
        prediction: One-step prediction ŷ(k|k-1) [mmol/L].
        t: Sample time [min].
    """

    error: float
    variance: float
    prediction: float
    t: float = 0.0


@dataclass(frozen=True)
class FilterModel:
    """Linearizable SDE ``dx = f(x) dt + σ dw`` with a linear scalar output.

    Attributes:
        drift: Deterministic vector field f(x).
        diffusion: Constant diffusion matrix σ.
        output_row: Row c with ŷ = c·x.
        measurement_variance: Measurement noise variance R.
        jacobian: Analytic df/dx; central differences are used when None.
    """

    drift: Callable[[Vector], Vector]
    diffusion: Matrix
    output_row: Vector
    measurement_variance: float
    jacobian: Callable[[Vector], Matrix] | None = None

    def jacobian_at(self, x: Vector) -> Matrix:
        """Drift Jacobian at ``x``."""
        if self.jacobian is not None:
            return self.jacobian(x)
        return fd_jacobian(lambda _t, z: self.drift(z), 0.0, x)


def ctrl_filter_model(params: CtrlParams, u: Vector, d: float) -> FilterModel:
    """Filter model of the MVP control model under held inputs."""
    return FilterModel(
        drift=lambda x: ctrl_drift(x, u, d, params),
        diffusion=ctrl_diffusion(params),
        output_row=output_jacobian(),
        measurement_variance=params.r,
        jacobian=lambda x: ctrl_jacobians(x, params)[0],
    )


def _symmetrize(p: Matrix) -> Matrix:
    return 0.5 * (p + p.T)


def predict_belief(
    belief: FilterBelief,
    model: FilterModel,
    dt: float,
    step: float,
    trace_cap: float = math.inf,
) -> FilterBelief:
    """Propagate mean and covariance over ``dt``.

    Raises:
        FilterDivergenceError: If the covariance trace exceeds ``trace_cap``.
    """
    n = belief.mean.size
    steps = max(1, round(dt / step))
    h = dt / steps
    qq = model.diffusion @ model.diffusion.T

    def joint(_t: float, z: Vector) -> Vector:
        x = z[:n]
        p = z[n:].reshape(n, n)
        a = model.jacobian_at(x)
        dp = a @ p + p @ a.T + qq
        return np.concatenate([model.drift(x), dp.ravel()])

    z = np.concatenate([belief.mean, belief.cov.ravel()])
    t = belief.t
    for _ in range(steps):
        z = rk4_step(joint, t, z, h)
        t += h

    cov = _symmetrize(z[n:].reshape(n, n))
    trace = float(np.trace(cov))
    if not math.isfinite(trace) or trace > trace_cap:
        raise FilterDivergenceError(trace, trace_cap)
    return FilterBelief(z[:n].copy(), cov, belief.t + dt)


def update_belief(
    belief: FilterBelief, y: float, output_row: Vector, measurement_variance: float
) -> tuple[FilterBelief, InnovationRecord]:
    """Scalar measurement update in Joseph form.

    Raises:
        InnovationVarianceError: If Re = c P cᵀ + R is not positive.
    """
    c = output_row
    p = belief.cov
    prediction = float(c @ belief.mean)
    pc = p @ c
    variance = float(c @ pc) + measurement_variance
    if not variance > 0 or not math.isfinite(variance):
        raise InnovationVarianceError(variance)

    error = y - prediction
    gain = pc / variance
    mean = belief.mean + gain * error
    ikc = np.eye(p.shape[0]) - np.outer(gain, c)
    cov = _symmetrize(ikc @ p @ ikc.T + measurement_variance * np.outer(gain, gain))

    record = InnovationRecord(error=error, variance=variance, prediction=prediction, t=belief.t)
    return FilterBelief(mean, cov, belief.t), record


def initial_covariance(settings: FilterSettings) -> Matrix:
    """Diagonal P0 of the control-model state."""
    diag = np.full(CTRL_STATE_SIZE, settings.other_variance)
    diag[CtrlIndex.G] = settings.glucose_variance
    diag[CtrlIndex.GI] = settings.glucose_variance
    diag[CtrlIndex.LOGSI] = settings.logsi_variance
    return np.diag(diag)


class FilterHooks(Protocol):
    """Adjustments applied around each measurement update."""

    def params_for(self, k: int, t: float, params: CtrlParams) -> CtrlParams:
        """Parameters to predict with after sample ``k``."""
        ...

    def adjust_belief(self, k: int, t: float, belief: FilterBelief) -> FilterBelief:
        """Belief correction applied after the update at sample ``k``."""
        ...


@dataclass
class FilterTrace:
    """Per-sample diagnostics rows (t, ŷ, e, Re, filtered mean)."""

    rows: list[dict[str, float]] = field(default_factory=list)

    def add(self, record: InnovationRecord, belief: FilterBelief) -> None:
        """Append one sample."""
        row = {"t_min": record.t, "y_hat": record.prediction, "e": record.error, "Re": record.variance}
        row.update({f"x_{idx.name}": float(belief.mean[idx]) for idx in CtrlIndex})
        self.rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        """Rows as a DataFrame."""
        return pd.DataFrame(self.rows)


@dataclass
class CdEkf:
    """CD-EKF over the MVP control model.

    Attributes:
        params: Control-model parameters.
        settings: Filter settings (trace cap).
        step: RK4 step used for propagation [min].
    """

    params: CtrlParams
    settings: FilterSettings = field(default_factory=FilterSettings)
    step: float = 2.5

    def predict(
        self, belief: FilterBelief, u: Vector, d: float, dt: float, params: CtrlParams | None = None
    ) -> FilterBelief:
        """Propagate the belief over ``dt`` under held inputs."""
        model = ctrl_filter_model(params or self.params, u, d)
        return predict_belief(belief, model, dt, self.step, self.settings.trace_cap)

    def update(self, belief: FilterBelief, y: float) -> tuple[FilterBelief, InnovationRecord]:
        """Measurement update with a CGM reading."""
        return update_belief(belief, y, output_jacobian(), self.params.r)


@dataclass
class FilterPassResult:
    """Output of a complete filter pass."""

    records: list[InnovationRecord]
    belief: FilterBelief


def filter_pass(
    ys: Sequence[float] | Vector,
    inputs: Matrix,
    meals: Sequence[float] | Vector,
    params: CtrlParams,
    x0: Vector,
    p0: Matrix,
    sample_time: float = 5.0,
    settings: FilterSettings | None = None,
    step: float = 2.5,
    hooks: FilterHooks | None = None,
    trace: FilterTrace | None = None,
    t0: float = 0.0,
) -> FilterPassResult:
    """Alternate update and predict over a record of N+1 samples.

    Args:
        ys: CGM samples y_0..y_N.
        inputs: Inputs (N+1 x 3 or N x 3); row k is held over [t_k, t_k+1).
        meals: Meal rates d_k [mmol/min], aligned with ``inputs``.
        params: Control-model parameters.
        x0: Prior mean at the first sample.
        p0: Prior covariance at the first sample.
        sample_time: Sample spacing [min].
        settings: Filter settings; defaults when None.
        step: RK4 step [min].
        hooks: Optional closed-loop adjustments.
        trace: Optional sink for diagnostics rows.
        t0: Time of the first sample.

    Returns:
        Innovation records for every sample and the final filtered belief.

    Raises:
        FilterDivergenceError: With the index of the failing sample.
        InnovationVarianceError: If an innovation variance is not positive.
    """
    settings = settings or FilterSettings()
    ekf = CdEkf(params=params, settings=settings, step=step)
    belief = FilterBelief(np.asarray(x0, dtype=float).copy(), np.asarray(p0, dtype=float).copy(), t0)
    records: list[InnovationRecord] = []
    n = len(ys)

    for k in range(n):
        belief, record = ekf.update(belief, float(ys[k]))
        if hooks is not None:
            belief = hooks.adjust_belief(k, belief.t, belief)
        records.append(record)
        if trace is not None:
            trace.add(record, belief)
        if k == n - 1:
            break
        step_params = hooks.params_for(k, belief.t, params) if hooks is not None else params
        try:
            belief = ekf.predict(belief, inputs[k], float(meals[k]), sample_time, step_params)
        except FilterDivergenceError as e:
            logger.debug("Filter diverged after sample %d (trace %.3g)", k, e.trace)
            raise FilterDivergenceError(e.trace, e.cap, sample_index=k) from e

    return FilterPassResult(records=records, belief=belief)
