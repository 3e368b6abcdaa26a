"""Fixed-step integrators: classical RK4, explicit Euler and Euler-Maruyama."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from dual_hormone_ap.core.errors import IntegrationError

type Vector = NDArray[np.float64]
type Matrix = NDArray[np.float64]
type VectorField = Callable[[float, Vector], Vector]
type ControlledField = Callable[[float, Vector, Vector], Vector]
type ControlledJacobian = Callable[[float, Vector, Vector], tuple[Matrix, Matrix]]


class Method(Enum):
    """Fixed-step integration scheme."""

    RK4 = "rk4"
    EULER = "euler"


@dataclass(frozen=True)
class IntegratorSpec:
    """Step size and number of steps covering one control interval.

    Attributes:
        method: Integration scheme.
        step: Step size h [min].
        steps: Steps per control interval.
    """

    method: Method = Method.RK4
    step: float = 2.5
    steps: int = 2

    def __post_init__(self) -> None:
        """Validate step configuration."""
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def interval(self) -> float:
        """Length of the control interval covered by one call to integrate."""
        return self.step * self.steps


def _checked(stage: int, value: Vector) -> Vector:
    if not np.all(np.isfinite(value)):
        raise IntegrationError(stage)
    return value


def rk4_step(f: VectorField, t: float, x: Vector, h: float) -> Vector:
    """Advance ``x`` by one classical Runge-Kutta step.

    Raises:
        IntegrationError: If a stage evaluation is not finite.
    """
    k1 = _checked(1, f(t, x))
    k2 = _checked(2, f(t + 0.5 * h, x + 0.5 * h * k1))
    k3 = _checked(3, f(t + 0.5 * h, x + 0.5 * h * k2))
    k4 = _checked(4, f(t + h, x + h * k3))
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(f: VectorField, t: float, x: Vector, h: float) -> Vector:
    """Advance ``x`` by one explicit Euler step."""
    return x + h * _checked(1, f(t, x))


def em_step(
    drift: VectorField,
    diffusion: Matrix,
    t: float,
    x: Vector,
    h: float,
    dw: Vector,
) -> Vector:
    """One Euler-Maruyama step ``x + f(t, x)·h + σ·dw``.

    Args:
        drift: Drift vector field.
        diffusion: Diffusion matrix σ (state dim × Wiener dim).
        t: Current time.
        x: Current state.
        h: Step size.
        dw: Wiener increments, distributed N(0, h·I), owned by the caller.
    """
    return x + h * _checked(1, drift(t, x)) + diffusion @ dw


def integrate(f: VectorField, t0: float, x0: Vector, spec: IntegratorSpec) -> Vector:
    """Integrate over one control interval with a fixed-step scheme."""
    step = rk4_step if spec.method is Method.RK4 else euler_step
    x = np.asarray(x0, dtype=float)
    t = t0
    for _ in range(spec.steps):
        x = step(f, t, x, spec.step)
        t += spec.step
    return x


def rk4_sensitivity_step(
    f: ControlledField,
    jac: ControlledJacobian,
    t: float,
    x: Vector,
    u: Vector,
    h: float,
) -> tuple[Vector, Matrix, Matrix]:
    """RK4 step with its exact derivatives w.r.t. the state and a held input.

    Differentiates the discrete scheme itself, so the returned sensitivities are
    the Jacobians of the map ``(x, u) -> x_next`` actually used.

    Args:
        f: Vector field ``f(t, x, u)``.
        jac: Returns ``(df/dx, df/du)`` at ``(t, x, u)``.
        t: Current time.
        x: Current state.
        u: Input held constant over the step.
        h: Step size.

    Returns:
        Tuple ``(x_next, dx_next/dx, dx_next/du)``.
    """
    n = x.size
    eye = np.eye(n)

    k1 = _checked(1, f(t, x, u))
    a1, b1 = jac(t, x, u)
    dk1_dx, dk1_du = a1, b1

    x2 = x + 0.5 * h * k1
    k2 = _checked(2, f(t + 0.5 * h, x2, u))
    a2, b2 = jac(t + 0.5 * h, x2, u)
    dk2_dx = a2 @ (eye + 0.5 * h * dk1_dx)
    dk2_du = a2 @ (0.5 * h * dk1_du) + b2

    x3 = x + 0.5 * h * k2
    k3 = _checked(3, f(t + 0.5 * h, x3, u))
    a3, b3 = jac(t + 0.5 * h, x3, u)
    dk3_dx = a3 @ (eye + 0.5 * h * dk2_dx)
    dk3_du = a3 @ (0.5 * h * dk2_du) + b3

    x4 = x + h * k3
    k4 = _checked(4, f(t + h, x4, u))
    a4, b4 = jac(t + h, x4, u)
    dk4_dx = a4 @ (eye + h * dk3_dx)
    dk4_du = a4 @ (h * dk3_du) + b4

    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    sx = eye + (h / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx)
    su = (h / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)
    return x_next, sx, su
