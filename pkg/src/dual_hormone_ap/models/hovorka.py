"""Extended Hovorka simulation model: the virtual patient used as plant.

Insulin, insulin action, meal, glucagon, exercise, glucose and CGM-lag
subsystems over a fixed 16-element state vector (order given by SimIndex).
Units: masses in mU, mmol or µg; concentrations in mU/L or mmol/L; time in min.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from enum import IntEnum

import numpy as np
from scipy.optimize import brentq

from dual_hormone_ap.core.errors import ConfigError, ModelEvaluationError
from dual_hormone_ap.models.params_io import param, symbol_of
from dual_hormone_ap.numerics.integrators import Vector, em_step

logger = logging.getLogger(__name__)

# Glucose molar mass [g/mol]; grams of CHO -> mmol is grams * 1000 / 180.
GLUCOSE_MMOL_PER_GRAM = 1000.0 / 180.0

# Smallest TE used inside the E2 equation [min].
TE_FLOOR = 1e-3

F01_THRESHOLD = 4.5
RENAL_THRESHOLD = 9.0
RENAL_RATE = 0.003


class SimIndex(IntEnum):
    """Position of each simulation state in the state vector."""

    S1 = 0
    S2 = 1
    I = 2  # noqa: E741
    X1 = 3
    X2 = 4
    X3 = 5
    D1 = 6
    D2 = 7
    Q1G = 8
    Q2G = 9
    E1 = 10
    TE = 11
    E2 = 12
    Q1 = 13
    Q2 = 14
    GI = 15


SIM_STATE_SIZE = len(SimIndex)


@dataclass(frozen=True)
class SimParams:
    """Constants of one simulated patient (70 kg literature defaults)."""

    tau_s: float = param(55.0, "tau_S")
    v_i: float = param(8.4, "V_I")
    k_e: float = param(0.138, "k_e")
    k_b1: float = param(3.072e-5, "k_b1")
    k_b2: float = param(4.92e-5, "k_b2")
    k_b3: float = param(1.56e-3, "k_b3")
    k_a1: float = param(0.006, "k_a1")
    k_a2: float = param(0.06, "k_a2")
    k_a3: float = param(0.03, "k_a3")
    a_g: float = param(0.8, "A_G")
    tau_d: float = param(40.0, "tau_D")
    tau_glu: float = param(19.0, "tau_Glu")
    hr_0: float = param(60.0, "HR_0")
    tau_hr: float = param(5.0, "tau_HR")
    c_1: float = param(500.0, "c_1")
    c_2: float = param(100.0, "c_2")
    tau_ex: float = param(200.0, "tau_ex")
    tau_in: float = param(1.0, "tau_in")
    a: float = param(0.77, "a")
    n: float = param(3.0, "n")
    k_12: float = param(0.066, "k_12")
    f_01: float = param(0.679, "F_01")
    v_g: float = param(11.2, "V_G")
    egp_0: float = param(1.127, "EGP_0")
    k_glu: float = param(1.2e-3, "K_Glu")
    alpha: float = param(1.79, "alpha")
    beta: float = param(0.78, "beta")
    tau_ig: float = param(10.0, "tau_IG")

    def __post_init__(self) -> None:
        """Check physical validity."""
        symbols = {f.name: symbol_of(f) for f in fields(self)}
        for name, symbol in symbols.items():
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(symbol, "must be finite")
        for name in ("tau_s", "tau_d", "tau_glu", "tau_hr", "tau_ex", "tau_in", "tau_ig", "v_g", "v_i", "hr_0", "a", "c_2"):
            if getattr(self, name) <= 0:
                raise ConfigError(symbols[name], "must be positive")
        if not 0 < self.a_g <= 1:
            raise ConfigError("A_G", "must lie in (0, 1]")
        if self.n < 1:
            raise ConfigError("n", "must be >= 1")

    @property
    def insulin_sensitivities(self) -> tuple[float, float, float]:
        """Steady-state gains x_i / I of the three insulin actions."""
        return (self.k_b1 / self.k_a1, self.k_b2 / self.k_a2, self.k_b3 / self.k_a3)


@dataclass(frozen=True)
class SimInputs:
    """Inputs held over an integration step.

    Attributes:
        insulin: Total infusion uba + ubo [mU/min].
        glucagon: Glucagon infusion [µg/min].
        meal: Carbohydrate rate D [mmol/min].
        heart_rate: Heart rate [BPM].
    """

    insulin: float = 0.0
    glucagon: float = 0.0
    meal: float = 0.0
    heart_rate: float = 60.0


@dataclass(frozen=True)
class GlucoseFluxes:
    """Auxiliary fluxes of the glucose subsystem [mmol/min], and G [mmol/L]."""

    egp: float
    qg: float
    qe21: float
    qe22: float
    qe1: float
    f01c: float
    fr: float
    g: float


def exercise_response(e1: float, params: SimParams) -> float:
    """Hill function f_E1 in [0, 1) of the short-term exercise effect."""
    ratio = max(e1, 0.0) / (params.a * params.hr_0)
    power = ratio**params.n
    return power / (1.0 + power)


def glucose_fluxes(state: Vector, params: SimParams) -> GlucoseFluxes:
    """Endogenous production, glucagon, exercise and clearance fluxes."""
    g = state[SimIndex.Q1] / params.v_g
    x1, x2, x3 = state[SimIndex.X1], state[SimIndex.X2], state[SimIndex.X3]
    e2_sq = state[SimIndex.E2] ** 2

    f01c = params.f_01 if g >= F01_THRESHOLD else params.f_01 * g / F01_THRESHOLD
    fr = RENAL_RATE * (g - RENAL_THRESHOLD) * params.v_g if g >= RENAL_THRESHOLD else 0.0

    return GlucoseFluxes(
        egp=params.egp_0 * (1.0 - x3),
        qg=params.k_glu * params.v_g * state[SimIndex.Q2G],
        qe21=params.alpha * e2_sq * x1 * state[SimIndex.Q1],
        qe22=params.alpha * e2_sq * x2 * state[SimIndex.Q2],
        qe1=params.beta * state[SimIndex.E1] / params.hr_0,
        f01c=f01c,
        fr=fr,
        g=g,
    )


def sim_derivative(state: Vector, inputs: SimInputs, params: SimParams, t: float = 0.0) -> Vector:
    """Time derivative of the 16-element simulation state.

    Raises:
        ModelEvaluationError: If any component is not finite.
    """
    del t  # autonomous given the held inputs
    s = state
    p = params
    flux = glucose_fluxes(s, p)
    fe1 = exercise_response(s[SimIndex.E1], p)
    te = max(s[SimIndex.TE], TE_FLOOR)

    dx = np.empty(SIM_STATE_SIZE)
    dx[SimIndex.S1] = inputs.insulin - s[SimIndex.S1] / p.tau_s
    dx[SimIndex.S2] = (s[SimIndex.S1] - s[SimIndex.S2]) / p.tau_s
    dx[SimIndex.I] = s[SimIndex.S2] / (p.v_i * p.tau_s) - p.k_e * s[SimIndex.I]
    dx[SimIndex.X1] = p.k_b1 * s[SimIndex.I] - p.k_a1 * s[SimIndex.X1]
    dx[SimIndex.X2] = p.k_b2 * s[SimIndex.I] - p.k_a2 * s[SimIndex.X2]
    dx[SimIndex.X3] = p.k_b3 * s[SimIndex.I] - p.k_a3 * s[SimIndex.X3]
    dx[SimIndex.D1] = p.a_g * inputs.meal - s[SimIndex.D1] / p.tau_d
    dx[SimIndex.D2] = (s[SimIndex.D1] - s[SimIndex.D2]) / p.tau_d
    dx[SimIndex.Q1G] = inputs.glucagon - s[SimIndex.Q1G] / p.tau_glu
    dx[SimIndex.Q2G] = (s[SimIndex.Q1G] - s[SimIndex.Q2G]) / p.tau_glu
    dx[SimIndex.E1] = (inputs.heart_rate - p.hr_0 - s[SimIndex.E1]) / p.tau_hr
    dx[SimIndex.TE] = (p.c_1 * fe1 + p.c_2 - s[SimIndex.TE]) / p.tau_ex
    dx[SimIndex.E2] = -(fe1 / p.tau_in + 1.0 / te) * s[SimIndex.E2] + fe1 * te / (p.c_1 + p.c_2)
    dx[SimIndex.Q1] = (
        s[SimIndex.D2] / p.tau_d
        - flux.f01c
        - flux.fr
        - s[SimIndex.X1] * s[SimIndex.Q1]
        + p.k_12 * s[SimIndex.Q2]
        + flux.egp
        + flux.qg
        - flux.qe21
    )
    # x2 multiplies Q2 in the non-accessible compartment
    dx[SimIndex.Q2] = (
        s[SimIndex.X1] * s[SimIndex.Q1]
        - p.k_12 * s[SimIndex.Q2]
        - s[SimIndex.X2] * s[SimIndex.Q2]
        + flux.qe21
        - flux.qe22
        - flux.qe1
    )
    dx[SimIndex.GI] = (flux.g - s[SimIndex.GI]) / p.tau_ig

    bad = np.flatnonzero(~np.isfinite(dx))
    if bad.size:
        raise ModelEvaluationError(SimIndex(int(bad[0])).name)
    return dx


def sim_output(state: Vector) -> float:
    """Interstitial glucose GI [mmol/L], the quantity a CGM senses."""
    return float(state[SimIndex.GI])


def plasma_glucose(state: Vector, params: SimParams) -> float:
    """Blood glucose G = Q1 / V_G [mmol/L]."""
    return float(state[SimIndex.Q1] / params.v_g)


def _glucose_residual(g: float, insulin: float, params: SimParams) -> float:
    """dQ1/dt at rest with Q2 at its own steady state."""
    s1, s2, s3 = params.insulin_sensitivities
    x1, x2, x3 = s1 * insulin, s2 * insulin, s3 * insulin
    q1 = g * params.v_g
    f01c = params.f_01 if g >= F01_THRESHOLD else params.f_01 * g / F01_THRESHOLD
    fr = RENAL_RATE * (g - RENAL_THRESHOLD) * params.v_g if g >= RENAL_THRESHOLD else 0.0
    net_uptake = q1 * x1 * x2 / (params.k_12 + x2)
    return params.egp_0 * (1.0 - x3) - f01c - fr - net_uptake


def sim_steady_state(params: SimParams, basal: float) -> Vector:
    """Resting steady state under constant basal insulin [mU/min].

    Raises:
        ModelEvaluationError: If no positive glucose equilibrium exists.
    """
    insulin = basal / (params.v_i * params.k_e)
    lo, hi = 1e-6, 100.0
    if _glucose_residual(lo, insulin, params) <= 0 or _glucose_residual(hi, insulin, params) >= 0:
        raise ModelEvaluationError("G", f"no steady state in ({lo}, {hi}) mmol/L at basal {basal:.3f}")
    g = brentq(_glucose_residual, lo, hi, args=(insulin, params), xtol=1e-12)
    return _assemble_steady_state(params, basal, insulin, g)


def basal_for_glucose(params: SimParams, glucose: float) -> float:
    """Basal rate [mU/min] whose resting steady state has glucose ``glucose``.

    Raises:
        ModelEvaluationError: If no nonnegative basal reaches that glucose.
    """

    def residual(insulin: float) -> float:
        return _glucose_residual(glucose, insulin, params)

    if residual(0.0) <= 0:
        raise ModelEvaluationError("I", f"glucose {glucose} is reached without insulin")
    hi = 1.0
    while residual(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise ModelEvaluationError("I", f"no basal rate reaches glucose {glucose}")
    insulin = brentq(residual, 0.0, hi, xtol=1e-12)
    return float(insulin * params.v_i * params.k_e)


def _assemble_steady_state(params: SimParams, basal: float, insulin: float, g: float) -> Vector:
    s1, s2, s3 = params.insulin_sensitivities
    x1, x2 = s1 * insulin, s2 * insulin
    q1 = g * params.v_g

    state = np.zeros(SIM_STATE_SIZE)
    state[SimIndex.S1] = basal * params.tau_s
    state[SimIndex.S2] = basal * params.tau_s
    state[SimIndex.I] = insulin
    state[SimIndex.X1] = x1
    state[SimIndex.X2] = x2
    state[SimIndex.X3] = s3 * insulin
    state[SimIndex.TE] = params.c_2
    state[SimIndex.Q1] = q1
    state[SimIndex.Q2] = x1 * q1 / (params.k_12 + x2)
    state[SimIndex.GI] = g
    return state


def meal_rate(grams: float, sample_time: float) -> float:
    """Carbohydrate rate [mmol/min] of a meal spread over one control interval."""
    return grams * GLUCOSE_MMOL_PER_GRAM / sample_time


def simulate_interval(
    state: Vector,
    inputs: SimInputs,
    params: SimParams,
    t: float,
    step: float,
    substeps: int,
    rng: np.random.Generator | None = None,
    glucose_diffusion: float = 0.0,
) -> Vector:
    """Advance the plant over one control interval with Euler-Maruyama steps.

    Args:
        state: Plant state at ``t``.
        inputs: Inputs held over the interval.
        params: Patient parameters.
        t: Interval start [min].
        step: Step size [min].
        substeps: Number of steps.
        rng: Generator for Wiener increments; required when diffusion is on.
        glucose_diffusion: Diffusion on Q1 [mmol/sqrt(min)].

    Returns:
        Plant state at ``t + step * substeps``.
    """
    sigma = np.zeros((SIM_STATE_SIZE, 1))
    sigma[SimIndex.Q1, 0] = glucose_diffusion
    noisy = glucose_diffusion > 0
    if noisy and rng is None:
        raise ValueError("rng is required when glucose_diffusion > 0")

    def drift(tt: float, x: Vector) -> Vector:
        return sim_derivative(x, inputs, params, tt)

    x = np.asarray(state, dtype=float)
    zero = np.zeros(1)
    for i in range(substeps):
        dw = rng.normal(0.0, np.sqrt(step), size=1) if noisy and rng is not None else zero
        x = em_step(drift, sigma, t + i * step, x, step, dw)
    return x
