"""Log-log order fits and bound-constant fits for residual samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROUNDOFF_FLOOR = 1e-11


@dataclass(frozen=True)
class OrderFit:
    slope: float
    constant: float
    exact: bool
    n_levels: int
    max_residual: float

    def passes(self, threshold: float) -> bool:
        """True if the fitted order reaches the threshold, or if the residual
        vanishes to round-off at every level (the bound then holds trivially)."""
        return self.exact or (np.isfinite(self.slope) and self.slope >= threshold)

    def as_dict(self):
        return {"slope": self.slope, "constant": self.constant, "exact": self.exact,
                "levels": self.n_levels, "max_residual": self.max_residual}


def envelope(dist, residual, decimals=12):
    """Maximum residual per distinct distance level."""
    dist = np.asarray(dist, dtype=float)
    residual = np.abs(np.asarray(residual, dtype=float))
    levels = np.unique(np.round(dist, decimals))
    env = np.array([np.max(residual[np.isclose(dist, d, rtol=1e-9, atol=0.0)]) for d in levels])
    return levels, env


def fit_order(dist, residual, floor=ROUNDOFF_FLOOR) -> OrderFit:
    """Least-squares slope of log(max residual) against log(distance)."""
    levels, env = envelope(dist, residual)
    max_res = float(np.max(env)) if env.size else 0.0
    keep = (env > floor) & (levels > 0)
    if max_res <= floor or np.count_nonzero(keep) < 2:
        return OrderFit(float("nan"), 0.0, max_res <= floor, int(levels.size), max_res)
    x, y = np.log(levels[keep]), np.log(env[keep])
    slope, intercept = np.polyfit(x, y, 1)
    return OrderFit(float(slope), float(np.exp(intercept)), False, int(np.count_nonzero(keep)), max_res)


def bound_constant(lhs, rhs, floor=0.0):
    """Smallest C with lhs <= C * rhs over samples where rhs > floor."""
    lhs = np.abs(np.asarray(lhs, dtype=float))
    rhs = np.asarray(rhs, dtype=float)
    keep = rhs > floor
    if not np.any(keep):
        return 0.0
    return float(np.max(lhs[keep] / rhs[keep]))


class SampleReport:
    """Residual samples grouped by check name, with per-check order fits."""

    columns = ("check", "t", "dist", "residual")

    def __init__(self):
        self._data = {}
        self.fits = {}
        self.values = {}

    def add(self, check, t, dist, residual):
        dist = np.atleast_1d(np.asarray(dist, dtype=float))
        residual = np.abs(np.atleast_1d(np.asarray(residual, dtype=float)))
        t = np.broadcast_to(np.asarray(t, dtype=float), dist.shape)
        store = self._data.setdefault(check, [[], [], []])
        store[0].append(t)
        store[1].append(dist)
        store[2].append(residual)

    def checks(self):
        return list(self._data)

    def data(self, check):
        t, d, r = self._data[check]
        return np.concatenate(t), np.concatenate(d), np.concatenate(r)

    def max(self, check):
        return float(np.max(self.data(check)[2]))

    def fit(self, check, floor=ROUNDOFF_FLOOR):
        _, d, r = self.data(check)
        self.fits[check] = fit_order(d, r, floor)
        return self.fits[check]

    def rows(self):
        out = []
        for check in self._data:
            t, d, r = self.data(check)
            out.extend((check, float(a), float(b), float(c)) for a, b, c in zip(t, d, r))
        return out
