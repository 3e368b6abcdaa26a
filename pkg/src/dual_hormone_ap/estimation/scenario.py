"""Identification experiments: open-loop meal-and-bolus records for system identification."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.estimation.dataset import IdDataset
from dual_hormone_ap.models.cgm import CgmSensor
from dual_hormone_ap.models.hovorka import (
    SimInputs,
    meal_rate,
    sim_output,
    sim_steady_state,
    simulate_interval,
)
from dual_hormone_ap.models.mvp import CtrlParams, ctrl_diffusion, ctrl_drift, ctrl_output
from dual_hormone_ap.models.patient import VirtualPatient
from dual_hormone_ap.numerics.integrators import Vector, em_step

logger = logging.getLogger(__name__)

# (minutes after start, grams CHO): dinner, breakfast, lunch, snack, dinner
DEFAULT_ID_MEALS: tuple[tuple[float, float], ...] = (
    (60.0, 75.0),
    (780.0, 50.0),
    (1080.0, 75.0),
    (1260.0, 15.0),
    (1500.0, 75.0),
)
DEFAULT_ID_SPAN = 36 * 60.0


def _meal_grid(meals: Sequence[tuple[float, float]], t: Vector, sample_time: float) -> Vector:
    grams = np.zeros(t.size)
    for when, amount in meals:
        k = round(when / sample_time)
        if 0 <= k < t.size:
            grams[k] += amount
    return grams


def meal_bolus_rate(grams: float, icr: float, sample_time: float) -> float:
    """Bolus rate [mU/min] delivering grams/ICR units over one interval."""
    return grams / icr * 1000.0 / sample_time


def generate_id_dataset(
    patient: VirtualPatient,
    config: RunConfig,
    seed: int,
    span: float = DEFAULT_ID_SPAN,
    meals: Sequence[tuple[float, float]] = DEFAULT_ID_MEALS,
) -> IdDataset:
    """Simulate the plant open loop: constant basal, meal boluses by ICR, CGM noise.

    Returns:
        A dataset starting at the patient's fasting steady state.
    """
    ts = config.integrator.sample_time
    t = np.arange(0.0, span + 0.5 * ts, ts)
    grams = _meal_grid(meals, t, ts)
    basal = np.full(t.size, patient.nominal_basal)
    bolus = np.array([meal_bolus_rate(g, patient.icr, ts) for g in grams])
    glucagon = np.zeros(t.size)

    cgm_seed, plant_seed = np.random.SeedSequence(seed).generate_state(2)
    sensor = CgmSensor(
        noise_sd=config.trial.cgm_noise_sd,
        ar=config.trial.cgm_ar,
        floor=config.trial.cgm_floor,
        seed=int(cgm_seed),
    )
    plant_rng = np.random.default_rng(int(plant_seed))
    state = sim_steady_state(patient.params, patient.nominal_basal)

    cgm = np.empty(t.size)
    for k in range(t.size):
        cgm[k] = sensor.sample(sim_output(state))
        if k == t.size - 1:
            break
        inputs = SimInputs(
            insulin=basal[k] + bolus[k],
            glucagon=glucagon[k],
            meal=meal_rate(grams[k], ts),
            heart_rate=patient.params.hr_0,
        )
        state = simulate_interval(
            state,
            inputs,
            patient.params,
            float(t[k]),
            config.integrator.plant_step,
            config.integrator.plant_substeps,
            plant_rng,
            config.trial.plant_diffusion,
        )

    logger.debug("Generated %d identification samples for %s", t.size, patient.patient_id)
    return IdDataset(t, cgm, basal, bolus, glucagon, grams, source=f"generated:{patient.patient_id}")


def generate_ctrl_dataset(
    params: CtrlParams,
    x0: Vector,
    basal: float,
    icr: float,
    seed: int,
    span: float = 24 * 60.0,
    meals: Sequence[tuple[float, float]] = DEFAULT_ID_MEALS,
    sample_time: float = 5.0,
    step: float = 0.5,
) -> IdDataset:
    """Simulate the control model itself as an SDE with measurement noise R.

    Gives a matched-model dataset whose generating parameters are known.
    """
    t = np.arange(0.0, span + 0.5 * sample_time, sample_time)
    grams = _meal_grid(meals, t, sample_time)
    basal_col = np.full(t.size, basal)
    bolus = np.array([meal_bolus_rate(g, icr, sample_time) for g in grams])
    glucagon = np.zeros(t.size)
    sigma = ctrl_diffusion(params)
    rng = np.random.default_rng(seed)
    substeps = max(1, round(sample_time / step))
    h = sample_time / substeps
    noise_sd = math.sqrt(params.r)

    x = np.asarray(x0, dtype=float).copy()
    cgm = np.empty(t.size)
    for k in range(t.size):
        cgm[k] = ctrl_output(x) + noise_sd * rng.standard_normal()
        if k == t.size - 1:
            break
        u = np.array([basal_col[k], bolus[k], glucagon[k]])
        d = meal_rate(grams[k], sample_time)
        for i in range(substeps):
            dw = rng.normal(0.0, math.sqrt(h), size=sigma.shape[1])
            x = em_step(lambda _t, z, u=u, d=d: ctrl_drift(z, u, d, params), sigma, float(t[k]) + i * h, x, h, dw)

    return IdDataset(t, cgm, basal_col, bolus, glucagon, grams, source="generated:control-model")
