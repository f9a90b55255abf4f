"""Transport of interface markers by prescribed velocity fields.

Markers follow the characteristics ``dx/dt = v(x, t)``, integrated with an
adaptive Runge-Kutta scheme of order 8(5,3).  The phase region is closed by
the domain-boundary arc between the two end markers, which the flow keeps on
the boundary because the velocity is tangential there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import geometry as geo
from .flows import AzimuthalFlow, rigid_rotation, zero_flow
from .functionals import PhaseState, SolutionPair, gauss_panels, integrate_phase
from .scene import disk_diameter, with_interface_rotated


class StepFailure(RuntimeError):
    """The adaptive integrator could not meet its tolerance."""


@dataclass
class Trajectory:
    times: np.ndarray
    markers: list
    domain: geo.DomainBoundary
    velocity: object
    closed: bool = False
    redistributions: list = field(default_factory=list)

    def phase(self, k, n_panels=256) -> PhaseState:
        return PhaseState.from_markers(self.markers[k], self.domain, float(self.times[k]),
                                       self.closed, n_panels)

    def perimeter(self, k):
        return self.phase(k).perimeter

    def area(self, k):
        return integrate_phase(self.phase(k), lambda p: np.ones(len(p)))

    def contact_angle_deviation(self, k):
        """Largest |90 deg - contact angle| over both ends, in degrees."""
        if self.closed:
            return 0.0
        ph = self.phase(k)
        _, tangent, _, _, _ = ph.frames(np.array([0.0, 1.0]))
        n_bd = self.domain.jets(ph.point(np.array([0.0, 1.0]))).n.val
        cosines = np.abs(np.sum(tangent * geo.rot_ccw(n_bd), axis=1))
        return float(np.degrees(np.max(np.arcsin(np.clip(cosines, 0.0, 1.0)))))

    def boundary_gap(self, k):
        """Distance of the end markers from the domain boundary."""
        if self.closed:
            return 0.0
        ends = self.markers[k][[0, -1]]
        return float(np.max(np.abs(self.domain.signed_distance(ends))))

    def contact_separation(self, k):
        if self.closed:
            return np.inf
        ends = self.markers[k][[0, -1]]
        return float(np.linalg.norm(ends[0] - ends[1]))

    def rows(self):
        out = []
        for k, t in enumerate(self.times):
            for j, (x, y) in enumerate(self.markers[k]):
                out.append({"t": float(t), "marker": j, "x": float(x), "y": float(y)})
        return out


def _spacing_ratio(pts):
    h = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return float(np.max(h) / np.min(h))


def redistribute(pts, closed=False):
    """Same number of markers, equally spaced in arc length along a spline."""
    pts = np.asarray(pts, dtype=float)
    loop = np.vstack([pts, pts[:1]]) if closed else pts
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(loop, axis=0), axis=1))])
    spline = CubicSpline(chord / chord[-1], loop, bc_type="periodic" if closed else "not-a-knot")
    nodes, weights = gauss_panels([0.0, 1.0], 4 * len(pts), 4)
    speed = np.linalg.norm(spline(nodes, 1), axis=1)
    cum = np.concatenate([[0.0], np.cumsum((speed * weights).reshape(-1, 4).sum(axis=1))])
    edges = np.linspace(0.0, 1.0, 4 * len(pts) + 1)
    n = len(pts)
    target = np.linspace(0.0, cum[-1], n + 1 if closed else n)
    u = np.interp(target, cum, edges)
    out = spline(u)
    return out[:-1] if closed else out


def evolve(initial, velocity, times, rtol=1e-11, atol=1e-12, tolerance=1e-9, n_markers=512,
           domain=None, closed=False, degrade_factor=2.0) -> Trajectory:
    """Transport markers along characteristics and record them at ``times``.

    ``initial`` is an (M, 2) marker array or a curve with ``point(u)``.
    Markers are redistributed by arc length whenever the spacing ratio grows
    by ``degrade_factor`` over its initial value.
    """
    times = np.asarray(times, dtype=float)
    if hasattr(initial, "point"):
        u = np.arange(n_markers) / n_markers if closed else np.linspace(0.0, 1.0, n_markers)
        pts = np.asarray(initial.point(u), dtype=float)
    else:
        pts = np.asarray(initial, dtype=float)
    if rtol > tolerance or atol > tolerance:
        raise ValueError("integrator tolerances must not exceed the required tolerance")
    base_ratio = _spacing_ratio(pts)
    m = len(pts)

    def rhs(t, y):
        return velocity.velocity(y.reshape(m, 2), t).ravel()

    out = [pts.copy()]
    redist = []
    current = pts.copy()
    for k in range(1, len(times)):
        sol = solve_ivp(rhs, (times[k - 1], times[k]), current.ravel(), method="DOP853",
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise StepFailure(f"integrator failed between t={times[k - 1]:g} and {times[k]:g}: "
                              f"{sol.message}")
        current = sol.y[:, -1].reshape(m, 2)
        if _spacing_ratio(current) > degrade_factor * base_ratio:
            current = redistribute(current, closed)
            base_ratio = _spacing_ratio(current)
            redist.append(float(times[k]))
        out.append(current.copy())
    return Trajectory(times, out, domain, velocity, closed, redist)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def tangential_divergence(phase: PhaseState, velocity, t):
    """int tau . (grad v tau) over the interface, the rate of change of its length."""
    tau = phase.tangents
    g = velocity.grad(phase.nodes, t)
    return float(np.sum(phase.weights * np.einsum("ki,kij,kj->k", tau, g, tau)))


def perimeter_rate_check(traj: Trajectory, floor=1e-12):
    """Centered differences of the interface length against the transport rate.

    Returns per interior time sample the difference quotient, the rate and
    their relative residual (absolute when both are below ``floor``).
    """
    if len(traj.times) < 3:
        raise ValueError("perimeter rate check needs at least three time samples")
    lengths = np.array([traj.perimeter(k) for k in range(len(traj.times))])
    rows = []
    for k in range(1, len(traj.times) - 1):
        h = traj.times[k + 1] - traj.times[k - 1]
        fd = (lengths[k + 1] - lengths[k - 1]) / h
        rate = tangential_divergence(traj.phase(k), traj.velocity, float(traj.times[k]))
        scale = max(abs(fd), abs(rate))
        rel = abs(fd - rate) / scale if scale > floor else abs(fd - rate)
        rows.append({"t": float(traj.times[k]), "fd_rate": fd, "rate": rate, "residual": rel})
    return {"rows": rows, "max_residual": max(r["residual"] for r in rows),
            "lengths": lengths.tolist()}


def area_drift(traj: Trajectory):
    """Largest relative change of the phase area along the trajectory."""
    areas = np.array([traj.area(k) for k in range(len(traj.times))])
    return float(np.max(np.abs(areas - areas[0])) / abs(areas[0])), areas


def separation_bound_ok(traj: Trajectory, grad_sup):
    """Contact points stay at least d0 exp(-2 sup|grad v| t) apart."""
    d0 = traj.contact_separation(0)
    return all(traj.contact_separation(k) >= d0 * np.exp(-2.0 * grad_sup * t) * (1 - 1e-12)
               for k, t in enumerate(traj.times))


def stress_residual(velocity, points, t):
    """max |grad v + grad v^T| over points."""
    g = velocity.grad(points, t)
    return float(np.max(np.abs(g + np.transpose(g, (0, 2, 1)))))


def rotated_diameter_error(omega=1.0, angle=np.pi / 2, n_markers=512):
    """Marker error after transporting the vertical diameter by a rigid rotation."""
    scene = disk_diameter(rigid_rotation(omega))
    curve = scene.interfaces[0].initial
    traj = evolve(curve, scene.velocity, [0.0, angle / omega], domain=scene.domain,
                  n_markers=n_markers)
    u = np.linspace(0.0, 1.0, n_markers)
    exact = geo.Segment(tuple(_rot(angle) @ np.asarray(curve.start)),
                        tuple(_rot(angle) @ np.asarray(curve.end))).point(u)
    return float(np.max(np.linalg.norm(traj.markers[-1] - exact, axis=1))), traj


def _rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


# ---------------------------------------------------------------------------
# strong / weak pairs
# ---------------------------------------------------------------------------

PRESETS = {
    "rigid": lambda: rigid_rotation(1.0),
    "shear": lambda: AzimuthalFlow(1.0, 0.5),
    "zero": zero_flow,
}


def make_pair(preset="rigid", eps=0.05, horizon=1.0, loc=None, simulate=False,
              n_markers=512, **pair_kw) -> SolutionPair:
    """Strong diameter fixture and the eps-rotated weak phase under the same flow.

    The weak phase comes from the exact flow map, or from marker transport
    when ``simulate`` is set.  The weak velocity equals the strong one and
    the weak varifold is the exact lift.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown pair preset {preset!r}; choose from {sorted(PRESETS)}")
    flow = PRESETS[preset]()
    strong = disk_diameter(flow, horizon=horizon)
    weak = with_interface_rotated(strong, eps)
    iface = weak.interfaces[0]
    if simulate:
        cache = {}

        def weak_phase(t):
            t = float(t)
            if t not in cache:
                traj = evolve(iface.initial, flow, [0.0, t] if t > 0 else [0.0], domain=strong.domain,
                              n_markers=n_markers)
                cache[t] = traj.phase(len(traj.times) - 1)
            return cache[t]
    else:
        def weak_phase(t):
            return PhaseState.from_interface(iface, strong.domain, float(t))
    return SolutionPair(strong, weak_phase, flow, loc, label=f"{preset}-eps{eps:g}", **pair_kw)
