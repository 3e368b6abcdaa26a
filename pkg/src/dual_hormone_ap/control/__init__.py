"""Control - receding-horizon optimization and the dosing heuristics around it."""

from dual_hormone_ap.control.controller import ControlStep, Controller
from dual_hormone_ap.control.dosing import (
    DosingState,
    PumpCommand,
    PumpLimits,
    SiGuard,
    basal_bound,
    bolus_bound,
    exercise_adjust,
    fallback,
    glucagon_available,
    glucagon_bound,
    quantize,
    switch_mode,
)
from dual_hormone_ap.control.ocp import (
    Mode,
    MultipleShootingNlp,
    OcpSolution,
    OcpSpec,
    cold_start,
    penalty_u,
    penalty_z,
    penalty_z_slope,
    shift_warm_start,
    solve_ocp,
    transcribe,
)
from dual_hormone_ap.control.sqp import (
    BoundedProblem,
    Linearization,
    SqpResult,
    SqpStatus,
    kkt_residual,
    solve_bounded_qp,
    sqp_solve,
)

__all__ = [
    "BoundedProblem",
    "ControlStep",
    "Controller",
    "DosingState",
    "Linearization",
    "Mode",
    "MultipleShootingNlp",
    "OcpSolution",
    "OcpSpec",
    "PumpCommand",
    "PumpLimits",
    "SiGuard",
    "SqpResult",
    "SqpStatus",
    "basal_bound",
    "bolus_bound",
    "cold_start",
    "exercise_adjust",
    "fallback",
    "glucagon_available",
    "glucagon_bound",
    "kkt_residual",
    "penalty_u",
    "penalty_z",
    "penalty_z_slope",
    "quantize",
    "shift_warm_start",
    "solve_bounded_qp",
    "solve_ocp",
    "sqp_solve",
    "switch_mode",
    "transcribe",
]
