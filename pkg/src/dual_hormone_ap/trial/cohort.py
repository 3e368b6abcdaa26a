"""Seeded virtual cohorts around the nominal simulation patient."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import fields, replace
from importlib import resources

import numpy as np

from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.core.errors import ConfigError, ModelEvaluationError
from dual_hormone_ap.models.hovorka import SimParams, basal_for_glucose, sim_output, sim_steady_state
from dual_hormone_ap.models.patient import VirtualPatient

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 100

# Carb-ratio rule: ICR [g/U] = CARB_RULE / total daily insulin [U/day].
CARB_RULE = 500.0

# Total daily insulin as a multiple of the daily basal.
TDI_PER_BASAL = 2.0

EQUILIBRIUM_TOLERANCE = 0.01


def carb_ratio(nominal_basal: float) -> float:
    """ICR [g/U] from the basal rate [mU/min] via the 500 rule."""
    daily_basal = nominal_basal * 24 * 60 / 1000.0
    return CARB_RULE / (TDI_PER_BASAL * daily_basal)


def perturb_params(nominal: SimParams, spread: float, rng: np.random.Generator) -> SimParams:
    """Scale every positive parameter by ``exp(spread * N(0, 1))``.

    The meal bioavailability is capped at 1 and the Hill exponent floored at 1.
    """
    values = {}
    for f in fields(nominal):
        value = getattr(nominal, f.name)
        if value > 0:
            value *= math.exp(spread * float(rng.standard_normal()))
        values[f.name] = value
    values["a_g"] = min(values["a_g"], 1.0)
    values["n"] = max(values["n"], 1.0)
    return replace(nominal, **values)


def make_patient(
    patient_id: str,
    params: SimParams,
    config: RunConfig,
    cgm_seed: int = 0,
) -> VirtualPatient:
    """Solve the nominal basal for ``params`` and derive the dosing constants.

    Raises:
        ModelEvaluationError: If no basal rate holds the target glucose.
    """
    target = config.trial.target_glucose
    basal = basal_for_glucose(params, target)
    glucose = sim_output(sim_steady_state(params, basal))
    if abs(glucose - target) > EQUILIBRIUM_TOLERANCE:
        raise ModelEvaluationError("G", f"equilibrium {glucose:.3f} misses target {target}")
    return VirtualPatient(
        patient_id=patient_id,
        params=params,
        nominal_basal=basal,
        isf=config.trial.isf,
        icr=carb_ratio(basal),
        cgm_seed=cgm_seed,
    )


def generate_cohort(
    n: int,
    seed: int,
    config: RunConfig | None = None,
    nominal: SimParams | None = None,
) -> list[VirtualPatient]:
    """Draw ``n`` patients; each has its own seed stream spawned from ``seed``.

    Draws without a valid steady state are rejected and redrawn.

    Raises:
        ValueError: If ``n`` < 1.
        ModelEvaluationError: If a patient cannot be drawn in MAX_ATTEMPTS tries.
    """
    if n < 1:
        raise ValueError("cohort size must be >= 1")
    config = config or RunConfig()
    nominal = nominal or SimParams()
    spread = config.trial.cohort_spread

    patients: list[VirtualPatient] = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n)):
        patient_id = f"patient-{i + 1:03d}"
        rng = np.random.default_rng(child)
        cgm_seed = int(child.generate_state(1)[0])
        for attempt in range(1, MAX_ATTEMPTS + 1):
            try:
                params = perturb_params(nominal, spread, rng)
                patients.append(make_patient(patient_id, params, config, cgm_seed))
                break
            except (ConfigError, ModelEvaluationError) as e:
                logger.debug("Rejected draw %d for %s: %s", attempt, patient_id, e)
        else:
            raise ModelEvaluationError("cohort", f"no valid draw for {patient_id} after {MAX_ATTEMPTS} attempts")

    logger.info("Generated %d patients (seed %d, spread %.2f)", n, seed, spread)
    return patients


DEFAULT_COHORT = "default_cohort.json"

# TrialSettings fields a cohort draw may pin.
DRAW_KEYS = frozenset({"cohort_spread", "isf", "target_glucose"})


def load_default_cohort(config: RunConfig | None = None, limit: int | None = None) -> list[VirtualPatient]:
    """Draw the bundled default cohort, or its first ``limit`` patients.

    The bundled file pins the seed, size and cohort settings, so the result
    does not depend on ``config.trial``.

    Raises:
        ConfigError: If the bundled draw is malformed.
        ModelEvaluationError: If a patient cannot be drawn.
    """
    text = resources.files("dual_hormone_ap.data").joinpath(DEFAULT_COHORT).read_text(encoding="utf-8")
    draw = json.loads(text).get("draw")
    if not isinstance(draw, dict) or "size" not in draw or "seed" not in draw:
        raise ConfigError(DEFAULT_COHORT, "expected a 'draw' object with 'size' and 'seed'")
    pinned = draw.get("trial", {})
    unknown = set(pinned) - DRAW_KEYS
    if unknown:
        raise ConfigError(DEFAULT_COHORT, f"unknown draw settings: {', '.join(sorted(unknown))}")

    config = config or RunConfig()
    config = replace(config, trial=replace(config.trial, **{k: float(v) for k, v in pinned.items()}))
    size = int(draw["size"])
    n = size if limit is None else min(limit, size)
    logger.debug("Drawing %d of %d patients from the default cohort", n, size)
    return generate_cohort(n, int(draw["seed"]), config)
