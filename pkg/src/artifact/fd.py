"""Central finite differences used as the independent check of jet derivatives."""

from __future__ import annotations

import numpy as np


def fd_jacobian(f, p, h=1e-5):
    """``J[k, i, j] = d f_i / d x_j`` of a vector field ``f(points) -> (N, 2)``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((f(p + e) - f(p - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def fd_gradient(f, p, h=1e-5):
    """Gradient of a scalar field ``f(points) -> (N,)``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    out = np.empty_like(p)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        out[:, j] = (f(p + e) - f(p - e)) / (2.0 * h)
    return out


def fd_divergence(f, p, h=1e-5):
    jac = fd_jacobian(f, p, h)
    return jac[:, 0, 0] + jac[:, 1, 1]


def fd_time(f, t, h=1e-5):
    """Central difference in time of ``f(t) -> array``."""
    return (np.asarray(f(t + h)) - np.asarray(f(t - h))) / (2.0 * h)
