"""Closed-loop dual-hormone controller: filter, heuristics and optimizer per interval."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.control.dosing import (
    DosingState,
    PumpCommand,
    PumpLimits,
    SiGuard,
    basal_bound,
    bolus_bound,
    exercise_adjust,
    fallback,
    glucagon_bound,
    quantize,
    switch_mode,
)
from dual_hormone_ap.control.ocp import Mode, OcpSolution, OcpSpec, shift_warm_start, solve_ocp
from dual_hormone_ap.core.errors import SolverError
from dual_hormone_ap.estimation.cdekf import CdEkf, FilterBelief, initial_covariance
from dual_hormone_ap.estimation.sysid import IdentifiedModel
from dual_hormone_ap.models.hovorka import meal_rate
from dual_hormone_ap.models.mvp import CtrlIndex

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlStep:
    """What the controller saw and decided at one sample time."""

    t: float
    cgm: float
    glucose: float
    logsi: float
    mode: Mode
    setpoint: float
    command: PumpCommand
    limits: PumpLimits
    status: str
    iterations: int = 0
    kkt: float = float("nan")
    objective: float = float("nan")

    def to_row(self) -> dict[str, float | str]:
        """Flat row for trajectory files."""
        return {
            "t_min": self.t,
            "cgm_mmolL": self.cgm,
            "g_hat_mmolL": self.glucose,
            "logsi_hat": self.logsi,
            "mode": self.mode.value,
            "setpoint_mmolL": self.setpoint,
            "uba_mUmin": self.command.basal,
            "ubo_mUmin": self.command.bolus,
            "ug_ugmin": self.command.glucagon,
            "uba_max": self.limits.basal,
            "ubo_max": self.limits.bolus,
            "ug_max": self.limits.glucagon,
            "status": self.status,
            "iterations": self.iterations,
            "kkt": self.kkt,
        }


@dataclass
class Controller:
    """One patient's controller, stepped once per sample interval.

    Attributes:
        model: Identified control model.
        nominal_basal: Basal reference ūba [mU/min].
        isf: Insulin sensitivity factor [(mmol/L)/U].
        icr: Insulin-to-carb ratio [g/U].
        config: Run configuration.
    """

    model: IdentifiedModel
    nominal_basal: float
    isf: float
    icr: float
    config: RunConfig = field(default_factory=RunConfig)
    state: DosingState = field(init=False)
    guard: SiGuard = field(init=False)
    ekf: CdEkf = field(init=False)
    belief: FilterBelief = field(init=False)
    previous: OcpSolution | None = field(default=None, init=False)
    solver_trace: list[dict[str, float]] = field(default_factory=list, init=False)

    def __post_init__(self) -> None:
        cfg = self.config
        ts = cfg.integrator.sample_time
        self.state = DosingState(config=cfg.dosing, sample_time=ts)
        self.guard = SiGuard(
            sigma_si=self.model.params.sigma_si,
            logsi_ref=self.model.logsi0,
            clip=cfg.dosing.logsi_clip,
            meal_window=cfg.dosing.meal_window,
            sample_time=ts,
        )
        self.ekf = CdEkf(params=self.model.params, settings=cfg.filter, step=cfg.integrator.control_step)
        self.belief = FilterBelief(self.model.x0.copy(), initial_covariance(cfg.filter), 0.0)

    def reset(self, x0: np.ndarray, t: float = 0.0) -> None:
        """Restart the filter from ``x0`` at time ``t``."""
        self.belief = FilterBelief(np.asarray(x0, dtype=float).copy(), initial_covariance(self.config.filter), t)
        self.previous = None

    def _limits(self, glucose: float, t: float, announced: bool) -> PumpLimits:
        _, basal_max = basal_bound(self.nominal_basal)
        return PumpLimits(
            basal=basal_max,
            bolus=bolus_bound(self.state, glucose, t, self.isf, self.icr, announced),
            glucagon=glucagon_bound(self.state),
        )

    def _spec(self, mode: Mode, limits: PumpLimits, meal: float) -> OcpSpec:
        cfg = self.config
        n = cfg.horizon_intervals
        if mode is Mode.INSULIN:
            upper = np.tile([limits.basal, limits.bolus], (n, 1))
        else:
            upper = np.full((n, 1), limits.glucagon)
        disturbance = np.zeros(n)
        disturbance[0] = meal
        return OcpSpec.build(
            mode,
            cfg.dosing,
            lower=np.zeros_like(upper),
            upper=upper,
            nominal_basal=np.full(n, self.nominal_basal),
            disturbance=disturbance,
            sample_time=cfg.integrator.sample_time,
            substeps=cfg.integrator.control_substeps,
            setpoint=self.state.setpoint,
        )

    def step(
        self,
        t: float,
        cgm: float,
        meal_grams: float = 0.0,
        exercise_start: bool = False,
        exercise_end: bool = False,
    ) -> ControlStep:
        """Filter the reading, choose and quantize doses, then predict ahead.

        Args:
            t: Current time [min].
            cgm: CGM reading [mmol/L].
            meal_grams: Carbohydrates announced now [g].
            exercise_start: Exercise begins now.
            exercise_end: Exercise ends now.

        Returns:
            The delivered command with diagnostics.
        """
        cfg = self.config
        ts = cfg.integrator.sample_time
        announced = meal_grams > 0
        if announced:
            self.state.announce_meal(t, meal_grams)
            self.guard.announce(t)

        self.belief.t = t
        self.belief, _ = self.ekf.update(self.belief, cgm)
        self.belief = self.guard.adjust_belief(0, t, self.belief)
        glucose = float(self.belief.mean[CtrlIndex.G])
        logsi = float(self.belief.mean[CtrlIndex.LOGSI])

        _, exercise_bolus = exercise_adjust(None, self.state, glucose, exercise_start, exercise_end)
        mode = switch_mode(self.state, glucose, t)
        limits = self._limits(glucose, t, announced)
        meal = meal_rate(meal_grams, ts)

        iterations, kkt, objective = 0, float("nan"), float("nan")
        # Inside the post-meal window insulin mode wins over the exercise bolus.
        if exercise_bolus > 0 and mode is Mode.GLUCAGON:
            raw = PumpCommand(glucagon=exercise_bolus / ts, source="exercise")
            status = "exercise"
            self.previous = None
        else:
            spec = self._spec(mode, limits, meal)
            try:
                solution = solve_ocp(
                    spec, self.belief.mean, self.ekf.params, cfg.solver, shift_warm_start(self.previous, spec)
                )
            except SolverError as e:
                logger.warning("Solver failed at t=%.0f (%s); using fallback dosing", t, e)
                raw = fallback(glucose, self.state, self.nominal_basal)
                status = "fallback"
                self.previous = None
            else:
                u = solution.first_input
                raw = PumpCommand(basal=float(u[0]), bolus=float(u[1]), glucagon=float(u[2]))
                status = solution.status.value
                iterations, kkt, objective = solution.iterations, solution.kkt, solution.objective
                self.previous = solution
                self.solver_trace.extend({"t_min": t, **row} for row in solution.trace)

        command = quantize(raw, cfg.dosing, ts, limits)
        self.state.record(command)

        predict_params = self.guard.params_for(0, t, self.ekf.params)
        self.belief = self.ekf.predict(self.belief, command.as_vector(), meal, ts, predict_params)

        return ControlStep(
            t=t,
            cgm=cgm,
            glucose=glucose,
            logsi=logsi,
            mode=mode,
            setpoint=self.state.setpoint,
            command=command,
            limits=limits,
            status=status,
            iterations=iterations,
            kkt=kkt,
            objective=objective,
        )
