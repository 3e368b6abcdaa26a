"""Numerics - fixed-step integrators and finite differences."""

from dual_hormone_ap.numerics.differentiation import fd_jacobian
from dual_hormone_ap.numerics.integrators import (
    IntegratorSpec,
    Matrix,
    Method,
    Vector,
    VectorField,
    em_step,
    euler_step,
    integrate,
    rk4_sensitivity_step,
    rk4_step,
)

__all__ = [
    "IntegratorSpec",
    "Matrix",
    "Method",
    "Vector",
    "VectorField",
    "em_step",
    "euler_step",
    "fd_jacobian",
    "integrate",
    "rk4_sensitivity_step",
    "rk4_step",
]
