"""Closed-loop simulation of one virtual patient under a protocol."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.control.controller import Controller
from dual_hormone_ap.core.errors import (
    FilterDivergenceError,
    InnovationVarianceError,
    IntegrationError,
    ModelEvaluationError,
)
from dual_hormone_ap.estimation.sysid import IdentifiedModel
from dual_hormone_ap.models.cgm import CgmSensor
from dual_hormone_ap.models.hovorka import (
    SimInputs,
    meal_rate,
    plasma_glucose,
    sim_output,
    sim_steady_state,
    simulate_interval,
)
from dual_hormone_ap.models.mvp import CtrlIndex, ctrl_equilibrium
from dual_hormone_ap.models.patient import VirtualPatient
from dual_hormone_ap.trial.metrics import GlycemicStats, tir_stats
from dual_hormone_ap.trial.protocol import Protocol

logger = logging.getLogger(__name__)


@dataclass
class TrialRecord:
    """Per-sample log of one closed-loop run.

    Attributes:
        patient_id: Patient simulated.
        rows: One dict per sample time.
        valid: False when the run was aborted.
        failure: Reason for an aborted run.
        solver_trace: Per-iteration solver diagnostics.
    """

    patient_id: str
    rows: list[dict[str, float | str]] = field(default_factory=list)
    valid: bool = True
    failure: str = ""
    solver_trace: list[dict[str, float]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """Rows as a DataFrame."""
        return pd.DataFrame(self.rows)

    def column(self, name: str) -> np.ndarray:
        """One numeric column."""
        return np.array([float(r[name]) for r in self.rows])

    def stats(self, sample_time: float = 5.0) -> GlycemicStats:
        """Glycemic statistics of the run.

        Raises:
            ValueError: If the record is invalid or empty.
        """
        if not self.valid:
            raise ValueError(f"record for {self.patient_id} is invalid: {self.failure}")
        return tir_stats(
            self.column("G_mmolL"),
            self.column("uba_mUmin"),
            self.column("ubo_mUmin"),
            self.column("ug_ugmin"),
            sample_time,
        )


def initial_belief_mean(model: IdentifiedModel, basal: float, glucose: float) -> np.ndarray:
    """Fasting control-model state at ``basal`` with glucose set to ``glucose``."""
    x = ctrl_equilibrium(model.params, basal, model.logsi0)
    x[CtrlIndex.G] = glucose
    x[CtrlIndex.GI] = glucose
    return x


def run_closed_loop(
    patient: VirtualPatient,
    model: IdentifiedModel,
    protocol: Protocol,
    config: RunConfig | None = None,
    seed: int = 0,
) -> TrialRecord:
    """Simulate ``patient`` under ``protocol`` with the controller in the loop.

    Every sample interval: read the CGM, step the controller, then advance the
    plant with the quantized command. Unannounced meals reach the plant only.

    Args:
        patient: Plant patient.
        model: Identified control model for the controller.
        protocol: Meals and exercise.
        config: Run configuration.
        seed: Seed combined with the patient's CGM seed.

    Returns:
        The record; ``valid`` is False if the plant or filter failed.
    """
    config = config or RunConfig()
    ts = config.integrator.sample_time
    cgm_seed, plant_seed = np.random.SeedSequence([seed, patient.cgm_seed]).generate_state(2)
    sensor = CgmSensor(
        noise_sd=config.trial.cgm_noise_sd,
        ar=config.trial.cgm_ar,
        floor=config.trial.cgm_floor,
        seed=int(cgm_seed),
    )
    plant_rng = np.random.default_rng(int(plant_seed))

    record = TrialRecord(patient.patient_id)
    controller = Controller(model, patient.nominal_basal, patient.isf, patient.icr, config)
    state = sim_steady_state(patient.params, patient.nominal_basal)
    intervals = round(protocol.span / ts)

    try:
        for k in range(intervals):
            t = k * ts
            y = sensor.sample(sim_output(state))
            if k == 0:
                controller.reset(initial_belief_mean(model, patient.nominal_basal, y), t)

            step = controller.step(
                t,
                y,
                meal_grams=protocol.meal_grams(t, ts, announced_only=True),
                exercise_start=protocol.exercise_starts(t, ts),
                exercise_end=protocol.exercise_ends(t, ts),
            )
            heart_rate = protocol.heart_rate(t, patient.params.hr_0)
            row: dict[str, float | str] = {
                "t_min": t,
                "G_mmolL": plasma_glucose(state, patient.params),
                "meal_g": protocol.meal_grams(t, ts),
                "heart_rate": heart_rate,
            }
            row.update(step.to_row())
            row["fallback"] = int(step.status == "fallback")
            record.rows.append(row)

            inputs = SimInputs(
                insulin=step.command.insulin,
                glucagon=step.command.glucagon,
                meal=meal_rate(protocol.meal_grams(t, ts), ts),
                heart_rate=heart_rate,
            )
            state = simulate_interval(
                state,
                inputs,
                patient.params,
                t,
                config.integrator.plant_step,
                config.integrator.plant_substeps,
                plant_rng,
                config.trial.plant_diffusion,
            )
    except (ModelEvaluationError, IntegrationError, FilterDivergenceError, InnovationVarianceError) as e:
        record.valid = False
        record.failure = str(e)
        logger.warning("Closed loop for %s aborted: %s", patient.patient_id, e)

    record.solver_trace = controller.solver_trace
    logger.info("Closed loop for %s finished (%d samples)", patient.patient_id, len(record.rows))
    return record
