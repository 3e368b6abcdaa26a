"""Models - Hovorka simulation plant, MVP control model, CGM sensor, patients."""

from dual_hormone_ap.models.cgm import CgmSensor
from dual_hormone_ap.models.hovorka import (
    SIM_STATE_SIZE,
    GlucoseFluxes,
    SimIndex,
    SimInputs,
    SimParams,
    basal_for_glucose,
    exercise_response,
    glucose_fluxes,
    meal_rate,
    plasma_glucose,
    sim_derivative,
    sim_output,
    sim_steady_state,
    simulate_interval,
)
from dual_hormone_ap.models.mvp import (
    CTRL_INPUT_SIZE,
    CTRL_STATE_SIZE,
    ESTIMATED_PARAMS,
    CtrlIndex,
    CtrlParams,
    InputIndex,
    ctrl_diffusion,
    ctrl_drift,
    ctrl_equilibrium,
    ctrl_jacobians,
    ctrl_output,
    equilibrium_basal,
    logsi_for_glucose,
    output_jacobian,
)
from dual_hormone_ap.models.params_io import (
    load_params,
    params_from_dict,
    params_to_dict,
    save_params,
)
from dual_hormone_ap.models.patient import VirtualPatient, load_cohort, save_cohort

__all__ = [
    "CTRL_INPUT_SIZE",
    "CTRL_STATE_SIZE",
    "ESTIMATED_PARAMS",
    "SIM_STATE_SIZE",
    "CgmSensor",
    "CtrlIndex",
    "CtrlParams",
    "GlucoseFluxes",
    "InputIndex",
    "SimIndex",
    "SimInputs",
    "SimParams",
    "VirtualPatient",
    "basal_for_glucose",
    "ctrl_diffusion",
    "ctrl_drift",
    "ctrl_equilibrium",
    "ctrl_jacobians",
    "ctrl_output",
    "equilibrium_basal",
    "exercise_response",
    "glucose_fluxes",
    "load_cohort",
    "load_params",
    "logsi_for_glucose",
    "meal_rate",
    "output_jacobian",
    "params_from_dict",
    "params_to_dict",
    "plasma_glucose",
    "save_cohort",
    "save_params",
    "sim_derivative",
    "sim_output",
    "sim_steady_state",
    "simulate_interval",
]
