"""Central finite-difference Jacobians."""

from __future__ import annotations

import numpy as np

from dual_hormone_ap.numerics.integrators import Matrix, Vector, VectorField

DEFAULT_SCALE = 1e-6


def fd_jacobian(
    f: VectorField, t: float, x: Vector, scale: float = DEFAULT_SCALE
) -> Matrix:
    """Central-difference Jacobian of ``f(t, ·)`` at ``x``.

    Coordinate ``i`` is perturbed by ``scale * max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(t, x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        step = scale * max(1.0, abs(x[i]))
        forward = x.copy()
        backward = x.copy()
        forward[i] += step
        backward[i] -= step
        jac[:, i] = (np.asarray(f(t, forward)) - np.asarray(f(t, backward))) / (2.0 * step)
    return jac
