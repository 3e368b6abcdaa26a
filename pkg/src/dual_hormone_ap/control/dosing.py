"""Dosing heuristics around the optimizer: mode switching, rolling caps, exercise,
insulin-sensitivity guarding, pump quantization and the open-loop fallback.

Rates are in mU/min (insulin) and µg/min (glucagon); a bolus is a rate held over
one sample interval.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from dual_hormone_ap.config import DosingConfig
from dual_hormone_ap.control.ocp import Mode, OcpSpec
from dual_hormone_ap.estimation.cdekf import FilterBelief
from dual_hormone_ap.models.mvp import CtrlIndex, CtrlParams

logger = logging.getLogger(__name__)

MU_PER_U = 1000.0
MIN_PER_HOUR = 60.0


@dataclass(frozen=True)
class PumpCommand:
    """Rates sent to the pumps for one interval.

    Attributes:
        basal: Basal insulin [mU/min].
        bolus: Bolus insulin [mU/min], held for one interval.
        glucagon: Glucagon [µg/min].
        quantized: Whether pump resolutions have been applied.
        source: Which path produced the command (nmpc, fallback, exercise).
    """

    basal: float = 0.0
    bolus: float = 0.0
    glucagon: float = 0.0
    quantized: bool = False
    source: str = "nmpc"

    def __post_init__(self) -> None:
        """Check signs and insulin/glucagon exclusivity."""
        if min(self.basal, self.bolus, self.glucagon) < 0:
            raise ValueError("pump rates must be nonnegative")
        if self.glucagon > 0 and (self.basal > 0 or self.bolus > 0):
            raise ValueError("insulin and glucagon cannot be given in the same interval")

    @property
    def insulin(self) -> float:
        """Total insulin rate [mU/min]."""
        return self.basal + self.bolus

    def as_vector(self) -> np.ndarray:
        """``[uba, ubo, uG]``."""
        return np.array([self.basal, self.bolus, self.glucagon])


@dataclass(frozen=True)
class PumpLimits:
    """Upper bounds for one interval [mU/min, mU/min, µg/min]."""

    basal: float = math.inf
    bolus: float = math.inf
    glucagon: float = math.inf


@dataclass
class DosingState:
    """Per-patient bookkeeping carried between control intervals."""

    config: DosingConfig = field(default_factory=DosingConfig)
    sample_time: float = 5.0
    mode: Mode = Mode.INSULIN
    bolus_history: deque[float] = field(init=False)
    glucagon_history: deque[float] = field(init=False)
    last_meal_time: float | None = None
    last_meal_grams: float = 0.0
    exercise_active: bool = False
    correction: float = 0.0

    def __post_init__(self) -> None:
        self.bolus_history = deque([0.0] * self.config.bolus_window, maxlen=self.config.bolus_window)
        self.glucagon_history = deque([0.0] * self.config.glucagon_window, maxlen=self.config.glucagon_window)

    def meal_recent(self, t: float) -> bool:
        """Whether ``t`` lies within the post-meal window of the last meal."""
        if self.last_meal_time is None:
            return False
        return 0.0 <= t - self.last_meal_time < self.config.meal_window

    def announce_meal(self, t: float, grams: float) -> None:
        """Register an announced meal; the bolus history restarts."""
        self.last_meal_time = t
        self.last_meal_grams = grams
        self.bolus_history.extend([0.0] * self.config.bolus_window)

    def record(self, command: PumpCommand) -> None:
        """Append the delivered doses to the rolling histories."""
        self.bolus_history.append(command.bolus)
        self.glucagon_history.append(command.glucagon)

    @property
    def glucagon_threshold(self) -> float:
        """Glucose below which glucagon mode is entered."""
        if self.exercise_active:
            return self.config.exercise_glucagon_threshold
        return self.config.glucagon_threshold

    @property
    def insulin_threshold(self) -> float:
        """Glucose above which insulin mode is entered."""
        if self.exercise_active:
            return self.config.exercise_glucagon_threshold + self.config.exercise_hysteresis
        return self.config.insulin_threshold

    @property
    def setpoint(self) -> float:
        """Current glucose target."""
        return self.config.exercise_setpoint if self.exercise_active else self.config.setpoint

    @property
    def glucagon_delivered(self) -> float:
        """Glucagon given over the glucagon window [µg]."""
        return sum(self.glucagon_history) * self.sample_time


def switch_mode(state: DosingState, glucose: float, t: float) -> Mode:
    """Pick the dosing mode from the current glucose estimate.

    Insulin mode is forced for the post-meal window. Between the two thresholds
    the previous mode is kept.
    """
    previous = state.mode
    if state.meal_recent(t):
        state.mode = Mode.INSULIN
    elif glucose < state.glucagon_threshold:
        state.mode = Mode.GLUCAGON
    elif glucose > state.insulin_threshold:
        state.mode = Mode.INSULIN
    if state.mode is not previous:
        logger.debug("Mode %s -> %s at t=%.0f (G=%.2f)", previous.value, state.mode.value, t, glucose)
    return state.mode


def bolus_bound(
    state: DosingState,
    glucose: float,
    t: float,
    isf: float,
    icr: float,
    announced: bool = False,
) -> float:
    """Upper bound on the bolus rate [mU/min] for the current interval.

    Args:
        state: Dosing state; its correction carryover may be recomputed.
        glucose: Current glucose estimate [mmol/L].
        t: Current time [min].
        isf: Insulin sensitivity factor [(mmol/L)/U].
        icr: Insulin-to-carb ratio [g/U].
        announced: Whether a meal was announced at ``t``.
    """
    cfg = state.config
    ts = state.sample_time
    recent = state.meal_recent(t)
    if announced or not recent:
        state.correction = max(0.0, (glucose - cfg.correction_threshold) / (isf * ts)) * MU_PER_U
    meal = 0.0
    if recent:
        meal = max(0.0, cfg.bolus_allowance * state.last_meal_grams / (icr * ts)) * MU_PER_U
    history = sum(state.bolus_history)
    return max(cfg.epsilon, state.correction + meal - history)


def glucagon_available(state: DosingState) -> float:
    """Glucagon left under the rolling cap [µg], floored at epsilon."""
    return max(state.config.epsilon, state.config.glucagon_cap - state.glucagon_delivered)


def glucagon_bound(state: DosingState) -> float:
    """Upper bound on the glucagon rate [µg/min] for the current interval."""
    return glucagon_available(state) / state.sample_time


def basal_bound(nominal_basal: float) -> tuple[float, float]:
    """Basal rate bounds: zero up to twice the nominal rate."""
    return 0.0, 2.0 * max(0.0, nominal_basal)


def exercise_adjust(
    spec: OcpSpec | None,
    state: DosingState,
    glucose: float,
    started: bool = False,
    ended: bool = False,
) -> tuple[OcpSpec | None, float]:
    """Apply exercise start or end.

    Returns:
        The problem with the current setpoint, and the immediate glucagon
        bolus [µg] to give now (zero when none is due).
    """
    bolus = 0.0
    if started:
        state.exercise_active = True
        if glucose < state.config.exercise_glucagon_threshold:
            bolus = min(state.config.exercise_glucagon_dose, glucagon_available(state))
            logger.debug("Exercise start at G=%.2f: %.1f µg glucagon", glucose, bolus)
    if ended:
        state.exercise_active = False
    if spec is not None:
        spec = replace(spec, setpoint=state.setpoint)
    return spec, bolus


@dataclass
class SiGuard:
    """Filter hooks that hold insulin sensitivity steady around meals.

    Process noise on logSI is switched off for the post-meal window, its
    covariance row and column are zeroed at each announcement, and the
    filtered logSI is clipped to a band around the identified value.
    """

    sigma_si: float
    logsi_ref: float
    clip: float = 1.0
    meal_window: float = 60.0
    sample_time: float = 5.0
    meal_times: list[float] = field(default_factory=list)
    _pending: set[float] = field(default_factory=set, repr=False)

    def announce(self, t: float) -> None:
        """Register a meal announced at ``t``."""
        self.meal_times.append(t)
        self._pending.add(t)

    def post_meal(self, t: float) -> bool:
        """Whether ``t`` lies in the window after any announced meal."""
        return any(0.0 <= t - tm < self.meal_window for tm in self.meal_times)

    def params_for(self, k: int, t: float, params: CtrlParams) -> CtrlParams:
        """Parameters with logSI diffusion off after meals."""
        sigma = 0.0 if self.post_meal(t) else self.sigma_si
        if params.sigma_si == sigma:
            return params
        return replace(params, sigma_si=sigma)

    def adjust_belief(self, k: int, t: float, belief: FilterBelief) -> FilterBelief:
        """Zero the logSI covariance at announcements and clip the logSI mean."""
        due = {tm for tm in self._pending if abs(tm - t) < 0.5 * self.sample_time}
        if due:
            belief.cov[CtrlIndex.LOGSI, :] = 0.0
            belief.cov[:, CtrlIndex.LOGSI] = 0.0
            self._pending -= due
        low, high = self.logsi_ref - self.clip, self.logsi_ref + self.clip
        belief.mean[CtrlIndex.LOGSI] = float(np.clip(belief.mean[CtrlIndex.LOGSI], low, high))
        return belief


def _round_half_away(value: float, resolution: float) -> float:
    return math.copysign(math.floor(abs(value) / resolution + 0.5), value) * resolution


def _snap(value: float, resolution: float, upper: float) -> float:
    q = _round_half_away(value, resolution)
    if q > upper:
        q = math.floor(upper / resolution + 1e-9) * resolution
    return max(0.0, q)


def quantize(
    command: PumpCommand,
    config: DosingConfig,
    sample_time: float = 5.0,
    limits: PumpLimits | None = None,
) -> PumpCommand:
    """Round each channel to its pump resolution.

    Basal rounds in U/h, bolus in U per interval and glucagon in µg/h; values
    that would round above their limit are floored to the resolution instead.
    """
    limits = limits or PumpLimits()
    basal_scale = MIN_PER_HOUR / MU_PER_U
    bolus_scale = sample_time / MU_PER_U
    basal = _snap(command.basal * basal_scale, config.basal_resolution, limits.basal * basal_scale) / basal_scale
    bolus = _snap(command.bolus * bolus_scale, config.bolus_resolution, limits.bolus * bolus_scale) / bolus_scale
    glucagon = (
        _snap(command.glucagon * MIN_PER_HOUR, config.glucagon_resolution, limits.glucagon * MIN_PER_HOUR)
        / MIN_PER_HOUR
    )
    return PumpCommand(basal=basal, bolus=bolus, glucagon=glucagon, quantized=True, source=command.source)


def fallback(glucose: float, state: DosingState, nominal_basal: float) -> PumpCommand:
    """Open-loop rule used when the optimizer fails.

    Basal only above the fallback threshold, never a bolus, and a small
    capped glucagon dose when low.
    """
    cfg = state.config
    glucagon = 0.0
    if glucose < cfg.glucagon_threshold:
        glucagon = min(cfg.fallback_glucagon_dose, glucagon_available(state)) / state.sample_time
    basal = nominal_basal if glucose > cfg.fallback_basal_threshold else 0.0
    if glucagon > 0:
        basal = 0.0
    return PumpCommand(basal=basal, bolus=0.0, glucagon=glucagon, source="fallback")
