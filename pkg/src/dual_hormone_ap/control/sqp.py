"""Bound-constrained SQP with Gauss-Newton Hessians and an Armijo line search.

Each iteration solves the box-constrained QP

    min_p  ½ pᵀ H p + gᵀ p   s.t.  lb - u <= p <= ub - u

as a bounded least-squares problem ``min ½‖Lᵀp + L⁻¹g‖²`` with ``H = L Lᵀ``,
handed to ``scipy.optimize.lsq_linear`` (BVLS).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve_triangular
from scipy.optimize import lsq_linear

from dual_hormone_ap.config import SolverSettings
from dual_hormone_ap.core.errors import SolverError
from dual_hormone_ap.numerics.integrators import Matrix, Vector

logger = logging.getLogger(__name__)

# Box widths below this are treated as fixed variables.
FIXED_WIDTH = 1e-12


class SqpStatus(Enum):
    """Termination reason."""

    CONVERGED = "converged"
    STALLED = "stalled"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class Linearization:
    """Objective value, gradient and Hessian approximation at an iterate."""

    value: float
    gradient: Vector
    hessian: Matrix


class BoundedProblem(Protocol):
    """Smooth objective over a box, as seen by the SQP solver."""

    @property
    def lower(self) -> Vector:
        """Lower bounds."""
        ...

    @property
    def upper(self) -> Vector:
        """Upper bounds."""
        ...

    def value(self, u: Vector) -> float:
        """Objective at ``u``."""
        ...

    def linearize(self, u: Vector) -> Linearization:
        """Objective, gradient and Hessian approximation at ``u``."""
        ...


@dataclass
class SqpResult:
    """Best iterate and convergence diagnostics."""

    u: Vector
    value: float
    kkt: float
    iterations: int
    status: SqpStatus
    trace: list[dict[str, float]] = field(default_factory=list)


def kkt_residual(u: Vector, gradient: Vector, lower: Vector, upper: Vector, value: float) -> float:
    """Projected-gradient stationarity, scaled by ``max(1, |value|)``."""
    projected = np.clip(u - gradient, lower, upper)
    return float(np.max(np.abs(u - projected), initial=0.0)) / max(1.0, abs(value))


def solve_bounded_qp(
    hessian: Matrix, gradient: Vector, lower: Vector, upper: Vector, regularisation: float = 1e-8
) -> Vector:
    """Minimize ``½ pᵀHp + gᵀp`` over ``lower <= p <= upper``.

    Raises:
        SolverError: If the Hessian cannot be factorized or BVLS fails.
    """
    n = gradient.size
    p = np.zeros(n)
    fixed = upper - lower <= FIXED_WIDTH
    p[fixed] = lower[fixed]
    free = ~fixed
    if not np.any(free):
        return p

    h_ff = hessian[np.ix_(free, free)]
    g_f = gradient[free] + hessian[np.ix_(free, fixed)] @ p[fixed]
    h_ff = 0.5 * (h_ff + h_ff.T)
    scale = max(1.0, float(np.max(np.abs(np.diag(h_ff)), initial=0.0)))
    h_ff = h_ff + regularisation * scale * np.eye(h_ff.shape[0])

    try:
        chol, _ = cho_factor(h_ff, lower=True)
    except LinAlgError as e:
        raise SolverError("qp_failure", f"Hessian not positive definite ({e})") from e
    chol = np.tril(chol)

    a = chol.T
    b = -solve_triangular(chol, g_f, lower=True)
    result = lsq_linear(a, b, bounds=(lower[free], upper[free]), method="bvls")
    if result.status < 0 or not np.all(np.isfinite(result.x)):
        raise SolverError("qp_failure", f"BVLS failed: {result.message}")

    p[free] = np.clip(result.x, lower[free], upper[free])
    return p


def sqp_solve(problem: BoundedProblem, warm_start: Vector, settings: SolverSettings | None = None) -> SqpResult:
    """Run SQP iterations from ``warm_start``.

    Args:
        problem: Objective and bounds.
        warm_start: Initial iterate; clipped into the box.
        settings: Tolerances and iteration cap.

    Returns:
        The last accepted iterate, which is also the best one.

    Raises:
        SolverError: On a non-finite objective at the start or a failed QP.
    """
    settings = settings or SolverSettings()
    lower, upper = problem.lower, problem.upper
    u = np.clip(np.asarray(warm_start, dtype=float), lower, upper)
    lin = problem.linearize(u)
    if not math.isfinite(lin.value) or not np.all(np.isfinite(lin.gradient)):
        raise SolverError("non_finite", "objective or gradient is not finite at the warm start")

    trace: list[dict[str, float]] = []
    status = SqpStatus.MAX_ITER
    iterations = 0
    kkt = kkt_residual(u, lin.gradient, lower, upper, lin.value)

    for iteration in range(1, settings.max_iterations + 1):
        trace.append({"iteration": iteration - 1, "objective": lin.value, "kkt": kkt})
        if kkt < settings.kkt_tolerance:
            status = SqpStatus.CONVERGED
            break

        step = solve_bounded_qp(lin.hessian, lin.gradient, lower - u, upper - u, settings.regularisation)
        slope = float(lin.gradient @ step)
        if slope >= 0:
            status = SqpStatus.STALLED
            break

        alpha = 1.0
        accepted: tuple[Vector, float] | None = None
        while alpha >= settings.min_step:
            candidate = np.clip(u + alpha * step, lower, upper)
            value = problem.value(candidate)
            if math.isfinite(value) and value <= lin.value + settings.armijo * alpha * slope:
                accepted = (candidate, value)
                break
            alpha *= 0.5

        if accepted is None:
            status = SqpStatus.STALLED
            break

        u = accepted[0]
        lin = problem.linearize(u)
        if not math.isfinite(lin.value) or not np.all(np.isfinite(lin.gradient)):
            raise SolverError("non_finite", f"objective became non-finite at iteration {iteration}")
        iterations = iteration
        kkt = kkt_residual(u, lin.gradient, lower, upper, lin.value)
    else:
        trace.append({"iteration": settings.max_iterations, "objective": lin.value, "kkt": kkt})
        if kkt < settings.kkt_tolerance:
            status = SqpStatus.CONVERGED

    logger.debug("SQP %s after %d iterations (objective %.6g, kkt %.2e)", status.value, iterations, lin.value, kkt)
    return SqpResult(u=u, value=lin.value, kkt=kkt, iterations=iterations, status=status, trace=trace)
