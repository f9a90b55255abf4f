"""One-dimensional profiles used by cutoffs, interpolation and weights.

Every profile is piecewise polynomial and C^2: the transition pieces are
quintic Hermite polynomials with vanishing first and second derivatives at
the plateau ends.  Each function comes with its derivative so that it can be
composed with :class:`artifact.jets.Jet`.
"""

from __future__ import annotations

import numpy as np


def smoothstep(x):
    """Quintic smoothstep: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def smoothstep_prime(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return 30.0 * x * x * (1.0 - x) ** 2


# bump: 1 on |r| <= 1/2, 0 on |r| >= 1 -----------------------------------

def bump(r):
    a = np.abs(np.asarray(r, dtype=float))
    return 1.0 - smoothstep(2.0 * a - 1.0)


def bump_prime(r):
    r = np.asarray(r, dtype=float)
    return -2.0 * np.sign(r) * smoothstep_prime(2.0 * np.abs(r) - 1.0)


# quadratic cutoff profile zeta(r) = (1 - r^2) * bump(r^2) -----------------

def zeta(r):
    r2 = np.asarray(r, dtype=float) ** 2
    return (1.0 - r2) * bump(r2)


def zeta_prime(r):
    r = np.asarray(r, dtype=float)
    r2 = r * r
    return -2.0 * r * bump(r2) + (1.0 - r2) * bump_prime(r2) * 2.0 * r


# truncated identity: r on |r| <= 1/2, sign(r) on |r| >= 1 -----------------
# On [1/2, 1] the profile is 1/2 + q(2r - 1)/2 with
# q(x) = x + 4x^3 - 7x^4 + 3x^5, so q(0)=0, q'(0)=1, q(1)=1, q'(1)=0 and both
# second derivatives vanish.  max q' is about 1.51, inside the bound 2.

def _q(x):
    return x + x ** 3 * (4.0 + x * (-7.0 + 3.0 * x))


def _q_prime(x):
    return 1.0 + x * x * (12.0 + x * (-28.0 + 15.0 * x))


def truncated_identity(r):
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    x = np.clip(2.0 * a - 1.0, 0.0, 1.0)
    outer = 0.5 + 0.5 * _q(x)
    return np.where(a <= 0.5, r, np.sign(r) * outer)


def truncated_identity_prime(r):
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    x = np.clip(2.0 * a - 1.0, 0.0, 1.0)
    return np.where(a <= 0.5, 1.0, _q_prime(x))


# interpolation base profile: 1 on (-inf, 1/3], 0 on [2/3, inf) ------------

def interp_base(y):
    return 1.0 - smoothstep(3.0 * np.asarray(y, dtype=float) - 1.0)


def interp_base_prime(y):
    return -3.0 * smoothstep_prime(3.0 * np.asarray(y, dtype=float) - 1.0)


COS30 = np.sqrt(3.0) / 2.0
_INTERP_SCALE = 1.0 - COS30


def interp_lambda(u):
    """lambda(u) = base((1 - u) / (1 - cos 30deg)) for a cosine u."""
    return interp_base((1.0 - np.asarray(u, dtype=float)) / _INTERP_SCALE)


def interp_lambda_prime(u):
    return -interp_base_prime((1.0 - np.asarray(u, dtype=float)) / _INTERP_SCALE) / _INTERP_SCALE


# cutoff profile in the squared variable: zeta(r) = zeta_sq(r^2) ------------

def zeta_sq(q):
    q = np.asarray(q, dtype=float)
    return (1.0 - q) * bump(q)


def zeta_sq_prime(q):
    q = np.asarray(q, dtype=float)
    return -bump(q) + (1.0 - q) * bump_prime(q)
