"""Extended MVP control model: drift, diffusion, output and Jacobians.

Shared by the CD-EKF, the maximum-likelihood estimator and the NMPC.
Inputs are ``u = [uba, ubo, uG]`` ([mU/min, mU/min, µg/min]) and the
disturbance ``d`` is the meal carbohydrate rate [mmol/min].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import IntEnum

import numpy as np

from dual_hormone_ap.core.errors import ConfigError, ModelEvaluationError
from dual_hormone_ap.models.params_io import param, symbol_of
from dual_hormone_ap.numerics.integrators import Matrix, Vector

# Used when the equilibrium insulin sensitivity would be nonpositive.
FALLBACK_SI = 1e-3


class CtrlIndex(IntEnum):
    """Position of each control-model state in the state vector."""

    ISC = 0
    IP = 1
    IEFF = 2
    G = 3
    LOGSI = 4
    D1 = 5
    D2 = 6
    Q1G = 7
    Q2G = 8
    GI = 9


class InputIndex(IntEnum):
    """Position of each manipulated input."""

    BASAL = 0
    BOLUS = 1
    GLUCAGON = 2


CTRL_STATE_SIZE = len(CtrlIndex)
CTRL_INPUT_SIZE = len(InputIndex)
WIENER_SIZE = 2

# Parameters identified from data; the rest stay fixed.
ESTIMATED_PARAMS = ("k_m", "tau_d", "v_g", "egp", "sigma_g", "sigma_si")


@dataclass(frozen=True)
class CtrlParams:
    """Control-model constants. ``k2`` and ``p2`` are tied to ``k1``."""

    k_1: float = param(0.02, "k_1")
    c_i: float = param(1.2, "C_I")
    gezi: float = param(2.2e-3, "GEZI")
    egp: float = param(0.05, "EGP")
    k_glu: float = param(1.2e-3, "K_Glu")
    k_m: float = param(0.025, "k_m")
    v_g: float = param(12.0, "V_G")
    a_g: float = param(0.8, "A_G")
    tau_d: float = param(40.0, "tau_D")
    tau_glu: float = param(19.0, "tau_Glu")
    tau_ig: float = param(10.0, "tau_IG")
    sigma_g: float = param(0.05, "sigma_G")
    sigma_si: float = param(0.01, "sigma_SI")
    r: float = param(0.0625, "R")

    def __post_init__(self) -> None:
        """Check physical validity."""
        symbols = {f.name: symbol_of(f) for f in fields(self)}
        for name, symbol in symbols.items():
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(symbol, "must be finite")
        for name in ("k_1", "c_i", "k_m", "v_g", "a_g", "tau_d", "tau_glu", "tau_ig", "r"):
            if getattr(self, name) <= 0:
                raise ConfigError(symbols[name], "must be positive")
        for name in ("sigma_g", "sigma_si"):
            if getattr(self, name) < 0:
                raise ConfigError(symbols[name], "must be nonnegative")

    @property
    def k_2(self) -> float:
        """Plasma insulin rate, equal to k1."""
        return self.k_1

    @property
    def p_2(self) -> float:
        """Insulin action rate, equal to k1."""
        return self.k_1


def ctrl_drift(state: Vector, u: Vector, d: float, params: CtrlParams) -> Vector:
    """Deterministic drift of the control model.

    Raises:
        ModelEvaluationError: If any component is not finite.
    """
    x = state
    p = params
    si = math.exp(x[CtrlIndex.LOGSI])

    dx = np.empty(CTRL_STATE_SIZE)
    dx[CtrlIndex.ISC] = p.k_1 * ((u[InputIndex.BASAL] + u[InputIndex.BOLUS]) / p.c_i - x[CtrlIndex.ISC])
    dx[CtrlIndex.IP] = p.k_2 * (x[CtrlIndex.ISC] - x[CtrlIndex.IP])
    dx[CtrlIndex.IEFF] = p.p_2 * (si * x[CtrlIndex.IP] - x[CtrlIndex.IEFF])
    dx[CtrlIndex.G] = (
        -(p.gezi + x[CtrlIndex.IEFF]) * x[CtrlIndex.G]
        + p.egp
        + p.k_m * x[CtrlIndex.D2] / p.v_g
        + p.k_glu * x[CtrlIndex.Q2G]
    )
    dx[CtrlIndex.LOGSI] = 0.0
    dx[CtrlIndex.D1] = p.a_g * d - x[CtrlIndex.D1] / p.tau_d
    dx[CtrlIndex.D2] = (x[CtrlIndex.D1] - x[CtrlIndex.D2]) / p.tau_d
    dx[CtrlIndex.Q1G] = u[InputIndex.GLUCAGON] - x[CtrlIndex.Q1G] / p.tau_glu
    dx[CtrlIndex.Q2G] = (x[CtrlIndex.Q1G] - x[CtrlIndex.Q2G]) / p.tau_glu
    dx[CtrlIndex.GI] = (x[CtrlIndex.G] - x[CtrlIndex.GI]) / p.tau_ig

    bad = np.flatnonzero(~np.isfinite(dx))
    if bad.size:
        raise ModelEvaluationError(CtrlIndex(int(bad[0])).name)
    return dx


def ctrl_jacobians(state: Vector, params: CtrlParams) -> tuple[Matrix, Matrix]:
    """Analytic drift Jacobians ``(df/dx, df/du)``; neither depends on ``u`` or ``d``."""
    x = state
    p = params
    si = math.exp(x[CtrlIndex.LOGSI])
    a = np.zeros((CTRL_STATE_SIZE, CTRL_STATE_SIZE))
    C = CtrlIndex

    a[C.ISC, C.ISC] = -p.k_1
    a[C.IP, C.ISC] = p.k_2
    a[C.IP, C.IP] = -p.k_2
    a[C.IEFF, C.IP] = p.p_2 * si
    a[C.IEFF, C.IEFF] = -p.p_2
    a[C.IEFF, C.LOGSI] = p.p_2 * si * x[C.IP]
    a[C.G, C.IEFF] = -x[C.G]
    a[C.G, C.G] = -(p.gezi + x[C.IEFF])
    a[C.G, C.D2] = p.k_m / p.v_g
    a[C.G, C.Q2G] = p.k_glu
    a[C.D1, C.D1] = -1.0 / p.tau_d
    a[C.D2, C.D1] = 1.0 / p.tau_d
    a[C.D2, C.D2] = -1.0 / p.tau_d
    a[C.Q1G, C.Q1G] = -1.0 / p.tau_glu
    a[C.Q2G, C.Q1G] = 1.0 / p.tau_glu
    a[C.Q2G, C.Q2G] = -1.0 / p.tau_glu
    a[C.GI, C.G] = 1.0 / p.tau_ig
    a[C.GI, C.GI] = -1.0 / p.tau_ig

    b = np.zeros((CTRL_STATE_SIZE, CTRL_INPUT_SIZE))
    b[C.ISC, InputIndex.BASAL] = p.k_1 / p.c_i
    b[C.ISC, InputIndex.BOLUS] = p.k_1 / p.c_i
    b[C.Q1G, InputIndex.GLUCAGON] = 1.0
    return a, b


def ctrl_diffusion(params: CtrlParams) -> Matrix:
    """Diffusion matrix (10 x 2): σG drives G, σSI drives logSI."""
    sigma = np.zeros((CTRL_STATE_SIZE, WIENER_SIZE))
    sigma[CtrlIndex.G, 0] = params.sigma_g
    sigma[CtrlIndex.LOGSI, 1] = params.sigma_si
    return sigma


def ctrl_output(state: Vector) -> float:
    """Predicted CGM reading: the interstitial glucose GI."""
    return float(state[CtrlIndex.GI])


def output_jacobian() -> Vector:
    """Row vector selecting GI."""
    c = np.zeros(CTRL_STATE_SIZE)
    c[CtrlIndex.GI] = 1.0
    return c


def ctrl_equilibrium(params: CtrlParams, basal: float, logsi: float) -> Vector:
    """Fasting equilibrium under constant basal insulin and no meal or glucagon."""
    ip = basal / params.c_i
    ieff = math.exp(logsi) * ip
    g = params.egp / (params.gezi + ieff)

    state = np.zeros(CTRL_STATE_SIZE)
    state[CtrlIndex.ISC] = ip
    state[CtrlIndex.IP] = ip
    state[CtrlIndex.IEFF] = ieff
    state[CtrlIndex.G] = g
    state[CtrlIndex.LOGSI] = logsi
    state[CtrlIndex.GI] = g
    return state


def logsi_for_glucose(params: CtrlParams, basal: float, glucose: float) -> float:
    """logSI placing the fasting equilibrium at ``glucose`` under ``basal``."""
    ip = basal / params.c_i
    ieff = params.egp / glucose - params.gezi
    if ip <= 0 or ieff <= 0:
        return math.log(FALLBACK_SI)
    return math.log(ieff / ip)


def equilibrium_basal(params: CtrlParams, logsi: float, glucose: float) -> float:
    """Basal rate [mU/min] holding the fasting equilibrium at ``glucose``."""
    ieff = params.egp / glucose - params.gezi
    if ieff <= 0:
        return 0.0
    return ieff / math.exp(logsi) * params.c_i
