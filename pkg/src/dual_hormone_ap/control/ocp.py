"""Multiple-shooting transcription of the receding-horizon dosing problem.

The horizon is split into N intervals of one sample time. Each interval holds
its decision inputs constant and is integrated with RK4 substeps of the control
model, without process noise. The glucose penalty is integrated with the
rectangle rule at substep left endpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from dual_hormone_ap.config import DosingConfig, SolverSettings
from dual_hormone_ap.control.sqp import Linearization, SqpStatus, sqp_solve
from dual_hormone_ap.core.errors import IntegrationError, ModelEvaluationError, SolverError
from dual_hormone_ap.models.mvp import (
    CTRL_INPUT_SIZE,
    CTRL_STATE_SIZE,
    CtrlIndex,
    CtrlParams,
    InputIndex,
    ctrl_drift,
    ctrl_jacobians,
)
from dual_hormone_ap.numerics.integrators import (
    ControlledField,
    ControlledJacobian,
    Matrix,
    Vector,
    rk4_sensitivity_step,
    rk4_step,
)

logger = logging.getLogger(__name__)


class Mode(Enum):
    """Which hormone the controller may dose."""

    INSULIN = "insulin"
    GLUCAGON = "glucagon"

    @property
    def inputs(self) -> tuple[InputIndex, ...]:
        """Pump channels that are decision variables in this mode."""
        if self is Mode.INSULIN:
            return (InputIndex.BASAL, InputIndex.BOLUS)
        return (InputIndex.GLUCAGON,)


@dataclass(frozen=True)
class OcpSpec:
    """One receding-horizon problem.

    Attributes:
        mode: Insulin or glucagon dosing.
        lower: Input lower bounds, one row per interval.
        upper: Input upper bounds, one row per interval.
        nominal_basal: Basal reference ūba per interval [mU/min].
        disturbance: Meal forecast per interval [mmol/min].
        sample_time: Interval length [min].
        substeps: RK4 substeps per interval.
        setpoint: Glucose target z̄ [mmol/L].
        z_min: Hypoglycemia threshold [mmol/L].
        z_max: Hyperglycemia threshold [mmol/L].
        weight_setpoint: Setpoint tracking weight.
        weight_hypo: Weight below z_min.
        weight_hyper: Weight above z_max.
    """

    mode: Mode
    lower: Matrix
    upper: Matrix
    nominal_basal: Vector
    disturbance: Vector
    sample_time: float = 5.0
    substeps: int = 2
    setpoint: float = 6.0
    z_min: float = 4.5
    z_max: float = 10.0
    weight_setpoint: float = 1.0
    weight_hypo: float = 1e6
    weight_hyper: float = 50.0

    def __post_init__(self) -> None:
        """Validate shapes and bound ordering."""
        n, nu = self.horizon, len(self.mode.inputs)
        if n < 1:
            raise ValueError("horizon must contain at least one interval")
        if self.lower.shape != (n, nu) or self.upper.shape != (n, nu):
            raise ValueError(f"bounds must have shape ({n}, {nu})")
        if self.nominal_basal.shape != (n,) or self.disturbance.shape != (n,):
            raise ValueError(f"nominal basal and disturbance need {n} entries")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bounds exceed upper bounds")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @classmethod
    def build(
        cls,
        mode: Mode,
        dosing: DosingConfig,
        lower: Matrix,
        upper: Matrix,
        nominal_basal: Vector,
        disturbance: Vector,
        sample_time: float = 5.0,
        substeps: int = 2,
        setpoint: float | None = None,
    ) -> OcpSpec:
        """Problem with weights and thresholds from the dosing config.

        The hyperglycemia weight is dropped in glucagon mode.
        """
        return cls(
            mode=mode,
            lower=np.asarray(lower, dtype=float),
            upper=np.asarray(upper, dtype=float),
            nominal_basal=np.asarray(nominal_basal, dtype=float),
            disturbance=np.asarray(disturbance, dtype=float),
            sample_time=sample_time,
            substeps=substeps,
            setpoint=dosing.setpoint if setpoint is None else setpoint,
            z_min=dosing.z_min,
            z_max=dosing.z_max,
            weight_setpoint=dosing.weight_setpoint,
            weight_hypo=dosing.weight_hypo,
            weight_hyper=dosing.weight_hyper if mode is Mode.INSULIN else 0.0,
        )

    @property
    def horizon(self) -> int:
        """Number of shooting intervals N."""
        return int(self.nominal_basal.shape[0])

    @property
    def input_size(self) -> int:
        """Decision inputs per interval."""
        return len(self.mode.inputs)

    @property
    def step(self) -> float:
        """RK4 substep length [min]."""
        return self.sample_time / self.substeps


def penalty_z(z: float, spec: OcpSpec) -> float:
    """Glucose penalty: setpoint tracking plus one-sided band penalties."""
    low = min(0.0, z - spec.z_min)
    high = max(0.0, z - spec.z_max)
    return 0.5 * (
        spec.weight_setpoint * (z - spec.setpoint) ** 2 + spec.weight_hypo * low**2 + spec.weight_hyper * high**2
    )


def penalty_z_slope(z: float, spec: OcpSpec) -> float:
    """Derivative of ``penalty_z``; continuous across the band edges."""
    return (
        spec.weight_setpoint * (z - spec.setpoint)
        + spec.weight_hypo * min(0.0, z - spec.z_min)
        + spec.weight_hyper * max(0.0, z - spec.z_max)
    )


def penalty_z_curvature(z: float, spec: OcpSpec) -> float:
    """Second derivative of the active quadratic pieces."""
    curvature = spec.weight_setpoint
    if z < spec.z_min:
        curvature += spec.weight_hypo
    if z > spec.z_max:
        curvature += spec.weight_hyper
    return curvature


def penalty_u(v: Vector, k: int, spec: OcpSpec) -> float:
    """Input penalty of interval ``k`` for the decision inputs ``v``.

    Insulin mode: squared basal deviation plus the bolus 1-norm. Glucagon
    mode: squared glucagon rate.
    """
    if spec.mode is Mode.INSULIN:
        return float((v[0] - spec.nominal_basal[k]) ** 2 + abs(v[1]))
    return float(v[0] ** 2)


def _penalty_u_derivatives(v: Vector, k: int, spec: OcpSpec) -> tuple[Vector, Vector]:
    # Bolus is nonnegative by its bounds, so its 1-norm is linear.
    if spec.mode is Mode.INSULIN:
        return np.array([2.0 * (v[0] - spec.nominal_basal[k]), 1.0]), np.array([2.0, 0.0])
    return np.array([2.0 * v[0]]), np.array([2.0])


@dataclass
class MultipleShootingNlp:
    """NLP over inputs ``u_0..u_{N-1}`` and state nodes ``s_1..s_N``.

    Variables are packed as ``w = [u (N*nu), s (N*nx)]``; ``s_0`` is the fixed
    initial state. Defects are ``c_k = s_{k+1} - Phi(s_k, u_k)``.
    """

    spec: OcpSpec
    x0: Vector
    params: CtrlParams
    _jac_b: Matrix = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (CTRL_STATE_SIZE,) or not np.all(np.isfinite(self.x0)):
            raise ValueError("initial state must be a finite control-model state")
        _, b = ctrl_jacobians(self.x0, self.params)
        self._jac_b = b[:, list(self.spec.mode.inputs)]

    @property
    def state_size(self) -> int:
        """Control-model state dimension."""
        return CTRL_STATE_SIZE

    @property
    def input_count(self) -> int:
        """Number of input variables N*nu."""
        return self.spec.horizon * self.spec.input_size

    @property
    def variable_count(self) -> int:
        """Inputs plus state nodes."""
        return self.input_count + self.spec.horizon * CTRL_STATE_SIZE

    @property
    def defect_count(self) -> int:
        """One state-sized defect per interval."""
        return self.spec.horizon * CTRL_STATE_SIZE

    @property
    def lower(self) -> Vector:
        """Flattened input lower bounds."""
        return self.spec.lower.ravel()

    @property
    def upper(self) -> Vector:
        """Flattened input upper bounds."""
        return self.spec.upper.ravel()

    def full_input(self, v: Vector) -> Vector:
        """Pump vector ``[uba, ubo, uG]`` with non-decision channels at zero."""
        u = np.zeros(CTRL_INPUT_SIZE)
        u[list(self.spec.mode.inputs)] = v
        return u

    def pack(self, u: Vector, nodes: Matrix) -> Vector:
        """Stack inputs and nodes ``s_1..s_N`` into one variable vector."""
        return np.concatenate([np.ravel(u), np.ravel(nodes)])

    def unpack(self, w: Vector) -> tuple[Matrix, Matrix]:
        """Split ``w`` into inputs (N x nu) and nodes (N x nx)."""
        n, nu = self.spec.horizon, self.spec.input_size
        u = w[: self.input_count].reshape(n, nu)
        s = w[self.input_count :].reshape(n, CTRL_STATE_SIZE)
        return u, s

    def _field(self, k: int) -> tuple[ControlledField, ControlledJacobian]:
        d = float(self.spec.disturbance[k])

        def f(_t: float, x: Vector, v: Vector) -> Vector:
            return ctrl_drift(x, self.full_input(v), d, self.params)

        def jac(_t: float, x: Vector, _v: Vector) -> tuple[Matrix, Matrix]:
            a, _ = ctrl_jacobians(x, self.params)
            return a, self._jac_b

        return f, jac

    def shoot(self, x: Vector, v: Vector, k: int) -> tuple[Vector, float]:
        """Integrate interval ``k`` from ``x``; return the end state and stage cost."""
        spec = self.spec
        f, _ = self._field(k)
        t = k * spec.sample_time
        cost = penalty_u(v, k, spec)
        for j in range(spec.substeps):
            cost += spec.step * penalty_z(float(x[CtrlIndex.GI]), spec)
            x = rk4_step(lambda tt, z: f(tt, z, v), t + j * spec.step, x, spec.step)
        return x, cost

    def rollout(self, u: Vector) -> tuple[Matrix, float]:
        """Single-shooting forward simulation.

        Returns:
            Nodes ``s_0..s_N`` as an (N+1) x nx matrix and the objective.
        """
        n, nu = self.spec.horizon, self.spec.input_size
        u = np.reshape(u, (n, nu))
        nodes = np.empty((n + 1, CTRL_STATE_SIZE))
        nodes[0] = self.x0
        total = 0.0
        for k in range(n):
            nodes[k + 1], cost = self.shoot(nodes[k], u[k], k)
            total += cost
        return nodes, total

    def objective(self, w: Vector) -> float:
        """Objective at a full variable vector; nodes need not be consistent."""
        u, s = self.unpack(w)
        starts = np.vstack([self.x0, s[:-1]])
        return sum(self.shoot(starts[k], u[k], k)[1] for k in range(self.spec.horizon))

    def defects(self, w: Vector) -> Vector:
        """Shooting defects ``s_{k+1} - Phi(s_k, u_k)``, flattened."""
        u, s = self.unpack(w)
        starts = np.vstack([self.x0, s[:-1]])
        out = np.empty((self.spec.horizon, CTRL_STATE_SIZE))
        for k in range(self.spec.horizon):
            out[k] = s[k] - self.shoot(starts[k], u[k], k)[0]
        return out.ravel()

    def _interval_derivatives(self, x: Vector, v: Vector, k: int) -> tuple[Vector, Matrix, Matrix, Vector, Vector]:
        """End state, its Jacobians and the stage-cost gradient w.r.t. ``(x, v)``."""
        spec = self.spec
        f, jac = self._field(k)
        nu = spec.input_size
        mx = np.eye(CTRL_STATE_SIZE)
        mu = np.zeros((CTRL_STATE_SIZE, nu))
        grad_u, _ = _penalty_u_derivatives(v, k, spec)
        grad_x = np.zeros(CTRL_STATE_SIZE)
        t = k * spec.sample_time
        for j in range(spec.substeps):
            slope = spec.step * penalty_z_slope(float(x[CtrlIndex.GI]), spec)
            grad_x = grad_x + slope * mx[CtrlIndex.GI]
            grad_u = grad_u + slope * mu[CtrlIndex.GI]
            x, sx, su = rk4_sensitivity_step(f, jac, t + j * spec.step, x, v, spec.step)
            mx = sx @ mx
            mu = sx @ mu + su
        return x, mx, mu, grad_x, grad_u

    def objective_gradient(self, w: Vector) -> Vector:
        """Exact gradient of ``objective`` w.r.t. ``w``."""
        u, s = self.unpack(w)
        nu = self.spec.input_size
        starts = np.vstack([self.x0, s[:-1]])
        grad = np.zeros(self.variable_count)
        for k in range(self.spec.horizon):
            _, _, _, gx, gu = self._interval_derivatives(starts[k], u[k], k)
            grad[k * nu : (k + 1) * nu] += gu
            if k > 0:
                offset = self.input_count + (k - 1) * CTRL_STATE_SIZE
                grad[offset : offset + CTRL_STATE_SIZE] += gx
        return grad

    def defect_jacobian(self, w: Vector) -> Matrix:
        """Dense Jacobian of ``defects`` w.r.t. ``w``."""
        u, s = self.unpack(w)
        nu, nx = self.spec.input_size, CTRL_STATE_SIZE
        starts = np.vstack([self.x0, s[:-1]])
        jac = np.zeros((self.defect_count, self.variable_count))
        for k in range(self.spec.horizon):
            _, mx, mu, _, _ = self._interval_derivatives(starts[k], u[k], k)
            rows = slice(k * nx, (k + 1) * nx)
            jac[rows, k * nu : (k + 1) * nu] = -mu
            own = self.input_count + k * nx
            jac[rows, own : own + nx] = np.eye(nx)
            if k > 0:
                prev = self.input_count + (k - 1) * nx
                jac[rows, prev : prev + nx] = -mx
        return jac

    def value(self, u: Vector) -> float:
        """Objective after eliminating the defects by forward simulation."""
        try:
            return self.rollout(u)[1]
        except (ModelEvaluationError, IntegrationError, FloatingPointError):
            return float("inf")

    def linearize(self, u: Vector) -> Linearization:
        """Condensed objective, gradient and Gauss-Newton Hessian over the inputs.

        Node sensitivities are chained interval by interval, so the defects
        stay eliminated and the QP has bound constraints only.
        """
        spec = self.spec
        n, nu, h = spec.horizon, spec.input_size, spec.step
        u = np.reshape(u, (n, nu))
        count = self.input_count

        sens = np.zeros((CTRL_STATE_SIZE, count))
        grad = np.zeros(count)
        hess = np.zeros((count, count))
        rows = np.empty((n * spec.substeps, count))
        weights = np.empty(n * spec.substeps)
        total = 0.0
        x = self.x0.copy()
        m = 0
        for k in range(n):
            cols = slice(k * nu, (k + 1) * nu)
            f, jac = self._field(k)
            total += penalty_u(u[k], k, spec)
            g_u, h_u = _penalty_u_derivatives(u[k], k, spec)
            grad[cols] += g_u
            hess[cols, cols] += np.diag(h_u)
            t = k * spec.sample_time
            for j in range(spec.substeps):
                z = float(x[CtrlIndex.GI])
                total += h * penalty_z(z, spec)
                row = sens[CtrlIndex.GI]
                grad += h * penalty_z_slope(z, spec) * row
                rows[m] = row
                weights[m] = h * penalty_z_curvature(z, spec)
                m += 1
                x, sx, su = rk4_sensitivity_step(f, jac, t + j * spec.step, x, u[k], spec.step)
                sens = sx @ sens
                sens[:, cols] += su
        hess += rows.T @ (weights[:, None] * rows)
        return Linearization(value=total, gradient=grad, hessian=hess)


@dataclass
class OcpSolution:
    """Optimized inputs with the predicted trajectory and solver diagnostics."""

    mode: Mode
    inputs: Matrix
    full_inputs: Matrix
    nodes: Matrix
    objective: float
    kkt: float
    iterations: int
    status: SqpStatus
    trace: list[dict[str, float]] = field(default_factory=list)

    @property
    def first_input(self) -> Vector:
        """Pump vector ``[uba, ubo, uG]`` to administer now."""
        return self.full_inputs[0]

    @property
    def predicted_glucose(self) -> Vector:
        """Predicted interstitial glucose at the nodes."""
        return self.nodes[:, CtrlIndex.GI]


def transcribe(spec: OcpSpec, x0: Vector, params: CtrlParams) -> MultipleShootingNlp:
    """Build the multiple-shooting NLP from the current state estimate."""
    return MultipleShootingNlp(spec=spec, x0=x0, params=params)


def cold_start(spec: OcpSpec) -> Matrix:
    """Nominal basal and no bolus in insulin mode; zero glucagon otherwise."""
    u = np.zeros((spec.horizon, spec.input_size))
    if spec.mode is Mode.INSULIN:
        u[:, 0] = spec.nominal_basal
    return np.clip(u, spec.lower, spec.upper)


def shift_warm_start(previous: OcpSolution | None, spec: OcpSpec) -> Matrix:
    """Previous solution shifted by one interval, last interval repeated.

    Falls back to ``cold_start`` when the mode or horizon changed.
    """
    if previous is None or previous.mode is not spec.mode or previous.inputs.shape != (spec.horizon, spec.input_size):
        return cold_start(spec)
    shifted = np.vstack([previous.inputs[1:], previous.inputs[-1:]])
    return np.clip(shifted, spec.lower, spec.upper)


def solve_ocp(
    spec: OcpSpec,
    x0: Vector,
    params: CtrlParams,
    settings: SolverSettings | None = None,
    warm_start: Matrix | None = None,
) -> OcpSolution:
    """Transcribe and solve one receding-horizon problem.

    Raises:
        SolverError: If the model cannot be evaluated along the iterates or a
            QP subproblem fails.
    """
    nlp = transcribe(spec, x0, params)
    start = cold_start(spec) if warm_start is None else np.clip(warm_start, spec.lower, spec.upper)
    try:
        result = sqp_solve(nlp, start.ravel(), settings)
        nodes, objective = nlp.rollout(result.u)
    except (ModelEvaluationError, IntegrationError, FloatingPointError) as e:
        raise SolverError("non_finite", str(e)) from e

    inputs = np.clip(result.u.reshape(spec.horizon, spec.input_size), spec.lower, spec.upper)
    full = np.array([nlp.full_input(v) for v in inputs])
    return OcpSolution(
        mode=spec.mode,
        inputs=inputs,
        full_inputs=full,
        nodes=nodes,
        objective=objective,
        kkt=result.kkt,
        iterations=result.iterations,
        status=result.status,
        trace=result.trace,
    )
