"""Extension of the interface unit normal to its tubular band.

The field is the unit normal composed with the nearest-point projection,
``xi(x, t) = n(P(x, t), t)``.  Derivatives come from the chart jets.
"""

from __future__ import annotations

import numpy as np

from .geometry import rot_cw
from .jets import VJet
from .orderfit import SampleReport


class FixtureInconsistent(ValueError):
    """The interface family is not transported by the scene velocity."""


# ---------------------------------------------------------------------------
# residuals shared by every extension field
# ---------------------------------------------------------------------------

def transport_residual(xi: VJet, v, grad_v):
    """``dt xi + (v . grad) xi + (Id - xi (x) xi) (grad v)^T xi`` per sample."""
    val = xi.val
    adv = xi.dt + np.einsum("kij,kj->ki", xi.jacobian, v)
    gt = np.einsum("kji,kj->ki", grad_v, val)
    proj = gt - np.sum(val * gt, axis=1)[:, None] * val
    return adv + proj


def length_residual(xi: VJet, v):
    """``dt |xi|^2 + v . grad |xi|^2``."""
    val = xi.val
    adv = xi.dt + np.einsum("kij,kj->ki", xi.jacobian, v)
    return 2.0 * np.sum(val * adv, axis=1)


def check_fixture(scene, times, n=64, tol=1e-8):
    """Raise if some interface does not move with the scene velocity."""
    for iface in scene.interfaces:
        u = np.linspace(0.0, 1.0, n, endpoint=not iface.closed)
        for t in np.atleast_1d(times):
            t = float(t)
            g1 = iface.d1(u, t)
            nrm = rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None])
            pts = iface.point(u, t)
            own = np.sum(iface.dt(u, t) * nrm, axis=1)
            given = np.sum(scene.velocity.velocity(pts, t) * nrm, axis=1)
            gap = float(np.max(np.abs(own - given)))
            if gap > tol:
                raise FixtureInconsistent(
                    f"interface {iface.name} normal speed differs from v by {gap:.3g} at t={t:g}")


# ---------------------------------------------------------------------------
# the field
# ---------------------------------------------------------------------------

class BulkExtension:
    """Unit normal of one interface extended constantly along normals."""

    def __init__(self, scene, index=0):
        self.scene = scene
        self.index = index
        self.iface = scene.interfaces[index]

    def jets(self, p, t, strict=True) -> VJet:
        ch = self.iface.jets(p, t, strict=strict)
        return ch.n

    def chart_jets(self, p, t, strict=True):
        return self.iface.jets(p, t, strict=strict)

    def __call__(self, p, t):
        return self.jets(p, t).val


def xi_bulk(scene, p, t, index=0):
    """Value, spatial Jacobian and time derivative of the bulk extension."""
    xi = BulkExtension(scene, index).jets(np.atleast_2d(p), t)
    return xi.val, xi.jacobian, xi.dt


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def normal_rays(iface, t, u_values, distances, domain=None):
    """Points gamma(u) + s n(u) for s = +-distance; returns points and |s|."""
    base = iface.point(u_values, t)
    g1 = iface.d1(u_values, t)
    nrm = rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None])
    pts, dist, ray = [], [], []
    for sign in (1.0, -1.0):
        for d in distances:
            pts.append(base + sign * d * nrm)
            dist.append(np.full(len(u_values), d))
            ray.append(np.arange(len(u_values)) * 2 + (sign < 0))
    pts, dist, ray = np.vstack(pts), np.concatenate(dist), np.concatenate(ray)
    if domain is not None:
        keep = domain.signed_distance(pts) > 0.0
        pts, dist, ray = pts[keep], dist[keep], ray[keep]
    return pts, dist, ray


def verify_bulk_properties(scene, index=0, times=None, n_rays=16,
                           distances=None, u_range=(0.15, 0.85)) -> SampleReport:
    """Divergence, transport and length residuals of the bulk extension on rays.

    Checks ``div`` (|div xi + H|), ``transport``, ``length`` and ``unit``
    (||xi| - 1|); the first two get order fits.
    """
    times = np.linspace(0.0, scene.horizon, 3) if times is None else np.atleast_1d(times)
    distances = np.logspace(-3, -1, 9) if distances is None else np.asarray(distances)
    check_fixture(scene, times)
    field_ = BulkExtension(scene, index)
    report = SampleReport()
    u = np.linspace(*u_range, n_rays)
    for t in times:
        t = float(t)
        pts, dist, _ = normal_rays(field_.iface, t, u, distances, scene.domain)
        ch = field_.chart_jets(pts, t)
        xi = ch.n
        v = scene.velocity.velocity(pts, t)
        gv = scene.velocity.grad(pts, t)
        report.add("div", t, dist, xi.div + ch.value.H)
        report.add("transport", t, dist, np.linalg.norm(transport_residual(xi, v, gv), axis=1))
        report.add("length", t, dist, length_residual(xi, v))
        report.add("unit", t, dist, np.linalg.norm(xi.val, axis=1) - 1.0)
    report.fit("div")
    report.fit("transport")
    return report
