"""Discrete phases, oriented point-mass varifolds and the error functionals.

A phase is the part of the domain on the side of one interface curve into
which its unit normal points.  Area integrals of smooth integrands over a
phase or the whole domain use a radial form of Green's theorem,

    int_R f dx = oint_{dR} F(x) (x - o) x dx,   F(x) = int_0^1 f(o + r (x - o)) r dr,

which holds for any region and any origin ``o`` from which the segments to
the boundary stay where ``f`` is defined.  Integrals weighted by
``chi_u - chi_v`` live on the thin symmetric difference of two phases and
are computed in normal coordinates of the reference interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from shapely.geometry import Polygon

from . import geometry as geo
from .calibration_bulk import transport_residual
from .calibration_global import CalibrationDomainMiss, GlobalCalibration, Localization
from .calibration_global import resolve_localization
from .weights import WeightField

GAUSS_ORDER = 8


class TimeSamplingTooCoarse(RuntimeError):
    """Halving the time step changed the inequality margin by more than 10%."""


def gauss_panels(breaks, panels_per_piece, order=GAUSS_ORDER):
    """Composite Gauss-Legendre nodes and weights on consecutive intervals."""
    x, w = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    nodes, weights = [], []
    for a, b, m in zip(breaks[:-1], breaks[1:], np.broadcast_to(panels_per_piece, len(breaks) - 1)):
        edges = np.linspace(a, b, int(m) + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        nodes.append((mid[:, None] + half[:, None] * x[None]).ravel())
        weights.append((half[:, None] * w[None]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhaseState:
    """Omega^+ of one interface curve at a fixed time.

    ``point``, ``d1`` and ``d2`` parametrize the interface on [0, 1] (and a
    little beyond, for open curves); the unit normal is the tangent turned
    clockwise and points into the phase.
    """

    domain: geo.DomainBoundary
    point: Callable
    d1: Callable
    d2: Callable
    closed: bool = False
    t: float = 0.0
    n_panels: int = 256
    order: int = GAUSS_ORDER

    @classmethod
    def from_interface(cls, iface: geo.EvolvingInterface, domain, t, n_panels=256, order=GAUSS_ORDER):
        return cls(domain, lambda u: iface.point(u, t), lambda u: iface.d1(u, t),
                   lambda u: iface.d2(u, t), iface.closed, float(t), n_panels, order)

    @classmethod
    def from_markers(cls, markers, domain, t=0.0, closed=False, n_panels=256, order=GAUSS_ORDER):
        """Cubic spline through marker positions, parametrized by chord length."""
        pts = np.asarray(markers, dtype=float)
        if closed:
            pts = np.vstack([pts, pts[:1]])
        chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        spline = CubicSpline(chord / chord[-1], pts, bc_type="periodic" if closed else "not-a-knot")
        d1, d2 = spline.derivative(1), spline.derivative(2)
        return cls(domain, lambda u: spline(np.atleast_1d(u)), lambda u: d1(np.atleast_1d(u)),
                   lambda u: d2(np.atleast_1d(u)), closed, float(t), n_panels, order)

    # interface quadrature ---------------------------------------------------
    @cached_property
    def _nodes(self):
        u, wu = gauss_panels([0.0, 1.0], self.n_panels, self.order)
        g1 = self.d1(u)
        speed = np.linalg.norm(g1, axis=1)
        tangent = g1 / speed[:, None]
        return u, self.point(u), tangent, geo.rot_cw(tangent), wu * speed

    @property
    def node_params(self):
        return self._nodes[0]

    @property
    def nodes(self):
        return self._nodes[1]

    @property
    def tangents(self):
        return self._nodes[2]

    @property
    def normals(self):
        return self._nodes[3]

    @property
    def weights(self):
        return self._nodes[4]

    @property
    def perimeter(self):
        return float(np.sum(self.weights))

    def frames(self, u):
        """Points, unit tangents, unit normals, speeds and normal derivatives at u."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        g1, g2 = self.d1(u), self.d2(u)
        speed = np.linalg.norm(g1, axis=1)
        tangent = g1 / speed[:, None]
        tangent_du = (g2 - np.sum(g2 * tangent, axis=1)[:, None] * tangent) / speed[:, None]
        return self.point(u), tangent, geo.rot_cw(tangent), speed, geo.rot_cw(tangent_du)

    # region boundary --------------------------------------------------------
    def _interface_piece(self, sign):
        u, x, _, _, w = self._nodes
        g1 = self.d1(u)
        return x, sign * g1 * (w / np.linalg.norm(g1, axis=1))[:, None]

    def _arc_piece(self, p0, p1):
        nodes, weights = gauss_panels([p0, p1], max(4, self.n_panels // 2), self.order)
        curve = self.domain.curve
        return curve.point(nodes), curve.d1(nodes) * weights[:, None]

    def arc_params(self):
        """Domain-boundary parameters of the counter-clockwise arc closing the phase."""
        ends = self.point(np.array([0.0, 1.0]))
        ua = float(self.domain.project(ends[:1])[0])
        ub = float(self.domain.project(ends[1:])[0])
        return ua, ua + (ub - ua) % 1.0

    def boundary_pieces(self):
        """Counter-clockwise boundary of the phase as (points, oriented line elements)."""
        pieces = [self._interface_piece(-1.0)]
        if self.closed:
            x = self.point(np.linspace(0.0, 1.0, 513)[:-1])
            area = 0.5 * np.sum(_cross(x, np.roll(x, -1, axis=0)))
            if area > 0:
                # counter-clockwise loop: the phase is the outside
                pieces.append(self._arc_piece(0.0, 1.0))
        else:
            pieces.append(self._arc_piece(*self.arc_params()))
        return pieces

    def polygon(self, n=2000):
        u = np.linspace(0.0, 1.0, n)
        pts = self.point(u[:-1] if self.closed else u)
        if self.closed:
            inner = Polygon(pts)
            area = 0.5 * np.sum(_cross(pts, np.roll(pts, -1, axis=0)))
            return Polygon(self.domain.sample(n)).difference(inner) if area > 0 else inner
        p0, p1 = self.arc_params()
        arc = self.domain.curve.point(np.linspace(p0, p1, n))
        return Polygon(np.vstack([pts[::-1], arc[1:-1]])).buffer(0)


def domain_pieces(domain, n_panels=64, order=GAUSS_ORDER):
    nodes, weights = gauss_panels([0.0, 1.0], n_panels, order)
    return [(domain.curve.point(nodes), domain.curve.d1(nodes) * weights[:, None])]


def domain_origin(domain):
    return np.mean(domain.sample(256), axis=0)


def radial_integral(pieces, f, origin, radial_panels=8, order=GAUSS_ORDER):
    """Area integral of ``f(points) -> (N,)`` over the region bounded by the pieces."""
    r, wr = gauss_panels([0.0, 1.0], radial_panels, order)
    total = 0.0
    for x, dx in pieces:
        rel = x - origin
        pts = origin + (r[None, :, None] * rel[:, None, :]).reshape(-1, 2)
        vals = np.asarray(f(pts), dtype=float).reshape(len(x), len(r))
        total += float(np.sum((vals @ (wr * r)) * _cross(rel, dx)))
    return total


def integrate_domain(domain, f, n_panels=64, radial_panels=8):
    return radial_integral(domain_pieces(domain, n_panels), f, domain_origin(domain), radial_panels)


def integrate_phase(phase: PhaseState, f, radial_panels=8):
    return radial_integral(phase.boundary_pieces(), f, domain_origin(phase.domain), radial_panels)


# ---------------------------------------------------------------------------
# symmetric difference in normal coordinates of the reference interface
# ---------------------------------------------------------------------------

@dataclass
class SymmetricDifference:
    """Quadrature for the region between two interfaces.

    ``sum(f(points) * signed)`` approximates ``int (chi_u - chi_v) f dx`` and
    ``sum(f(points) * np.abs(signed))`` the integral over the region.
    """

    points: np.ndarray
    signed: np.ndarray
    breakpoints: np.ndarray

    @property
    def weights(self):
        return np.abs(self.signed)

    @property
    def area(self):
        return float(np.sum(self.weights))

    def integrate(self, values, signed=True):
        values = np.asarray(values, dtype=float)
        return float(np.sum(values * (self.signed if signed else self.weights)))


def _line_hits(phase_u: PhaseState, x, n, u0, iters=40, tol=1e-13):
    """Signed offsets s with x + s n on the curve of phase_u (vectorized Newton)."""
    u = np.array(u0, dtype=float)
    s = np.zeros(len(x))
    for _ in range(iters):
        g = phase_u.point(u) - x - s[:, None] * n
        if np.max(np.abs(g)) < tol:
            break
        a = phase_u.d1(u)
        det = _cross(a, -n)
        du = (-g[:, 0] * (-n[:, 1]) + g[:, 1] * (-n[:, 0])) / det
        ds = (-a[:, 0] * g[:, 1] + a[:, 1] * g[:, 0]) / det
        u += du
        s += ds
    g = phase_u.point(u) - x - s[:, None] * n
    if np.max(np.abs(g)) > 1e-9:
        raise geo.GeometryError("normal line of the reference interface misses the other interface")
    return s


def _exit_offset(domain, x, direction, s_max, iters=60):
    """Largest s in [0, s_max] with x + s direction inside the domain (bisection)."""
    lo, hi = np.zeros(len(x)), np.array(s_max, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = domain.signed_distance(x + mid[:, None] * direction) >= 0.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def _end_offsets(phase_u, phase_v, u):
    x, _, n, _, _ = phase_v.frames(u)
    s = _line_hits(phase_u, x, n, u)
    tip = x + s[:, None] * n
    out = s.copy()
    outside = phase_v.domain.signed_distance(tip) < 0.0
    if np.any(outside):
        d = np.sign(s[outside])[:, None] * n[outside]
        out[outside] = np.sign(s[outside]) * _exit_offset(phase_v.domain, x[outside], d,
                                                           np.abs(s[outside]))
    return out


def _breakpoints(phase_u, phase_v, coarse=129, grading=24):
    """Parameters on the reference interface where the integrand has a kink."""
    grid = np.linspace(0.0, 1.0, coarse)
    brk = [0.0, 1.0]
    gx, _, gn, _, _ = phase_v.frames(grid)
    raw = _line_hits(phase_u, gx, gn, grid)

    def hit(u):
        x, _, n, _, _ = phase_v.frames(u)
        return float(_line_hits(phase_u, x, n, np.atleast_1d(u))[0])

    # crossings of the two interfaces
    for k in np.nonzero(np.sign(raw[:-1]) * np.sign(raw[1:]) < 0)[0]:
        brk.append(brentq(hit, grid[k], grid[k + 1], xtol=1e-15))
    brk.extend(grid[1:-1][raw[1:-1] == 0.0])
    # normal lines through the ends of the other interface (clipping switches)
    if not phase_u.closed:
        for end in phase_u.point(np.array([0.0, 1.0])):
            x, tangent = phase_v.point(grid), phase_v.frames(grid)[1]
            g = np.sum((end - x) * tangent, axis=1)
            for k in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
                def foot(u, end=end):
                    xx, tt = phase_v.frames(u)[:2]
                    return float(np.sum((end - xx[0]) * tt[0]))
                brk.append(brentq(foot, grid[k], grid[k + 1], xtol=1e-15))
    brk = np.unique(np.clip(brk, 0.0, 1.0))
    brk = brk[np.concatenate([[True], np.diff(brk) > 1e-12])]
    if not phase_v.closed:
        # integrands vary on the scale of the distance to a contact point, and the
        # offset has a square-root singularity where the boundary arc takes over:
        # geometric grading toward both ends keeps the panels proportionate
        grade = 0.25 * 0.5 ** np.arange(grading)
        brk = np.unique(np.concatenate([brk, grade, 1.0 - grade]))
        brk = brk[np.concatenate([[True], np.diff(brk) > 1e-14])]
    return brk


def symmetric_difference(phase_u: PhaseState, phase_v: PhaseState, n_panels=16, s_panels=2,
                         order=GAUSS_ORDER) -> SymmetricDifference:
    """Quadrature on the region between the interfaces of two phases.

    Both interfaces must carry the same orientation, and every point between
    them must lie on a normal line of the reference interface (true for small
    perturbations; ``area_gap`` checks it against a polygon computation).
    """
    brk = _breakpoints(phase_u, phase_v)
    per_piece = np.maximum(2, np.ceil(n_panels * np.diff(brk)).astype(int))
    u, wu = gauss_panels(brk, per_piece, order)
    x, _, n, speed, n_du = phase_v.frames(u)
    s_end = _end_offsets(phase_u, phase_v, u)
    r, wr = gauss_panels([0.0, 1.0], s_panels, order)
    s = s_end[:, None] * r[None]
    pts = x[:, None, :] + s[..., None] * n[:, None, :]
    du_x = speed[:, None, None] * geo.rot_ccw(n)[:, None, :] + s[..., None] * n_du[:, None, :]
    jac = np.abs(_cross(du_x, np.broadcast_to(n[:, None, :], du_x.shape)))
    # between the curves chi_u - chi_v = -sign(s)
    signed = -(jac * (wu * s_end)[:, None] * wr[None])
    return SymmetricDifference(pts.reshape(-1, 2), signed.ravel(), brk)


def area_gap(phase_u, phase_v, sd: SymmetricDifference | None = None, n=4000):
    """Relative gap between the quadrature area and the polygon symmetric difference."""
    sd = symmetric_difference(phase_u, phase_v) if sd is None else sd
    poly = phase_u.polygon(n).symmetric_difference(phase_v.polygon(n)).area
    return abs(sd.area - poly) / max(poly, 1e-300), sd.area, poly


def triangulated_integral(region, f, levels=3, order=6):
    """Independent route: constrained triangulation refined uniformly, Gauss on triangles."""
    import shapely

    tris = shapely.constrained_delaunay_triangles(region)
    corners = np.array([np.asarray(t.exterior.coords)[:3] for t in tris.geoms])
    for _ in range(levels):
        a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        corners = np.concatenate([np.stack(q, 1) for q in
                                  ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))])
    # collapsed tensor Gauss rule on the reference triangle
    g, wg = np.polynomial.legendre.leggauss(order)
    g, wg = 0.5 * (g + 1.0), 0.5 * wg
    xi = g[:, None] * np.ones_like(g)[None]
    eta = (1.0 - g)[:, None] * g[None]
    w = (wg[:, None] * wg[None]) * (1.0 - g)[:, None]
    xi, eta, w = xi.ravel(), eta.ravel(), w.ravel()
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    area2 = np.abs(_cross(b - a, c - a))
    pts = a[:, None] + xi[None, :, None] * (b - a)[:, None] + eta[None, :, None] * (c - a)[:, None]
    vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(len(a), len(w))
    return float(np.sum(area2 * (vals @ w)))


# ---------------------------------------------------------------------------
# varifolds
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteVarifoldSlice:
    """Point masses ``w`` at positions ``x`` with orientations ``s``.

    ``site`` links an atom to the interface quadrature node it sits on (-1
    for none); ``bv_weight`` holds the phase-boundary mass of every node.
    """

    x: np.ndarray
    s: np.ndarray
    w: np.ndarray
    site: np.ndarray
    bv_weight: np.ndarray

    def __post_init__(self):
        if np.any(self.w < 0.0):
            raise ValueError("varifold masses must be nonnegative")

    @property
    def total_mass(self):
        return float(np.sum(self.w))

    @cached_property
    def site_mass(self):
        return np.bincount(self.site[self.site >= 0], self.w[self.site >= 0],
                           minlength=len(self.bv_weight))

    @cached_property
    def theta_sites(self):
        """Multiplicity density at every interface node."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.site_mass > 0, self.bv_weight / self.site_mass, 1.0)

    @cached_property
    def theta(self):
        """Multiplicity density per atom (0 away from the phase boundary)."""
        out = np.zeros(len(self.w))
        on = self.site >= 0
        out[on] = self.theta_sites[self.site[on]]
        return out

    def on_boundary(self, domain, tol=1e-12):
        return np.abs(domain.signed_distance(self.x)) <= tol

    def with_atoms(self, x, s, w, site=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.atleast_2d(np.asarray(s, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        site = np.full(len(w), -1) if site is None else np.atleast_1d(site)
        return DiscreteVarifoldSlice(np.vstack([self.x, x]), np.vstack([self.s, s]),
                                     np.concatenate([self.w, w]),
                                     np.concatenate([self.site, site]).astype(int), self.bv_weight)


def lift_phase_to_varifold(phase: PhaseState) -> DiscreteVarifoldSlice:
    """Unit-multiplicity varifold of the phase boundary inside the domain."""
    k = np.arange(len(phase.weights))
    return DiscreteVarifoldSlice(phase.nodes.copy(), phase.normals.copy(), phase.weights.copy(),
                                 k, phase.weights.copy())


def add_hidden_sheet(varifold: DiscreteVarifoldSlice, phase: PhaseState, extra=1.0):
    """Extra mass ``extra`` times the node weight, split evenly between +n and -n.

    The orientations cancel, so compatibility is kept while the multiplicity
    density drops to ``1 / (1 + extra)``.
    """
    k = np.arange(len(phase.weights))
    half = 0.5 * extra * phase.weights
    out = varifold.with_atoms(phase.nodes, phase.normals, half, k)
    return out.with_atoms(phase.nodes, -phase.normals, half, k)


def tangential_test_fields(domain):
    """Smooth fields tangential on the domain boundary.

    They are the rotated gradient of a quadratic defining function of the
    disk or ellipse, multiplied by a few polynomials, plus two fields with
    compact support inside the domain.
    """
    if isinstance(domain, geo.DiskBoundary):
        a = b = domain.radius
    elif isinstance(domain, geo.EllipseBoundary):
        a, b = domain.a, domain.b
    else:
        raise NotImplementedError("tangential test fields need a disk or ellipse")

    def rotated(x):
        x = np.atleast_2d(x)
        return np.stack([-2.0 * x[:, 1] / b ** 2, 2.0 * x[:, 0] / a ** 2], 1)

    def bump(center, radius, direction):
        def field_(x):
            x = np.atleast_2d(x)
            q = np.sum((x - center) ** 2, axis=1) / radius ** 2
            return np.where(q < 1, (1 - q) ** 3, 0.0)[:, None] * np.asarray(direction)[None]
        return field_

    scale = 0.5 * min(a, b)
    return [
        rotated,
        lambda x: rotated(x) * (1.0 + np.atleast_2d(x)[:, :1]),
        lambda x: rotated(x) * (np.atleast_2d(x)[:, 1:] ** 2 - np.atleast_2d(x)[:, :1]),
        bump(np.array([0.1 * a, 0.2 * b]), scale, (1.0, 0.3)),
        bump(np.array([-0.2 * a, -0.1 * b]), scale, (-0.4, 1.0)),
    ]


def compatibility_residual(varifold, phase, fields=None):
    """Largest gap between sum w psi.s and the phase-boundary integral of psi.n."""
    fields = tangential_test_fields(phase.domain) if fields is None else fields
    gaps = []
    for psi in fields:
        lhs = np.sum(varifold.w * np.sum(psi(varifold.x) * varifold.s, axis=1))
        rhs = np.sum(phase.weights * np.sum(psi(phase.nodes) * phase.normals, axis=1))
        gaps.append(abs(lhs - rhs))
    return float(max(gaps))


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def _xi_values(xi, points):
    vals = np.asarray(xi(points), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise CalibrationDomainMiss("extension field undefined at a quadrature node")
    return vals


@dataclass
class InterfaceError:
    value: float
    boundary_mass: float
    multiplicity_defect: float
    bv_part: float
    alternative: float

    @property
    def decomposition_gap(self):
        return abs(self.value - (self.boundary_mass + self.multiplicity_defect + self.bv_part))

    @property
    def representation_gap(self):
        return abs(self.value - self.alternative)

    def as_dict(self):
        return {"E_interface": self.value, "hidden_boundary": self.boundary_mass,
                "multiplicity_defect": self.multiplicity_defect, "bv_part": self.bv_part,
                "alternative_form": self.alternative,
                "decomposition_gap": self.decomposition_gap,
                "representation_gap": self.representation_gap}


def interface_error(phase: PhaseState, varifold: DiscreteVarifoldSlice, xi, sigma=1.0,
                    boundary_tol=1e-12) -> InterfaceError:
    """Interface error, its three-term decomposition and the orientation form.

    ``xi(points) -> (N, 2)`` is the extension field at the slice time.
    """
    xi_nodes = _xi_values(xi, phase.nodes)
    xi_atoms = _xi_values(xi, varifold.x)
    tilt = 1.0 - np.sum(phase.normals * xi_nodes, axis=1)
    on_bd = varifold.on_boundary(phase.domain, boundary_tol)
    value = sigma * (varifold.total_mass - np.sum(phase.weights * np.sum(phase.normals * xi_nodes, axis=1)))
    bd = sigma * float(np.sum(varifold.w[on_bd]))
    inner = ~on_bd
    mult = sigma * float(np.sum((1.0 - varifold.theta[inner]) * varifold.w[inner]))
    bv = sigma * float(np.sum(phase.weights * tilt))
    alt = sigma * float(np.sum(varifold.w * (1.0 - np.sum(varifold.s * xi_atoms, axis=1))))
    return InterfaceError(float(value), bd, mult, bv, alt)


def tilt_excess_controls(phase, varifold, xi, sigma=1.0, dist=None, coercivity_C=None,
                         err: InterfaceError | None = None, boundary_tol=1e-12):
    """Left sides of the four error controls with their bounds and margins.

    ``dist(points)`` is the distance to the strong interface and
    ``coercivity_C`` the constant in |xi| <= 1 - C dist^2; the distance
    control is skipped when either is missing.
    """
    err = interface_error(phase, varifold, xi, sigma, boundary_tol) if err is None else err
    xi_nodes = _xi_values(xi, phase.nodes)
    xi_atoms = _xi_values(xi, varifold.x)
    out = {}
    lhs = sigma * 0.5 * float(np.sum(phase.weights * np.sum((phase.normals - xi_nodes) ** 2, axis=1)))
    out["bv_tilt"] = (lhs, err.bv_part)
    if dist is not None and coercivity_C is not None:
        d2 = np.asarray(dist(phase.nodes)) ** 2
        lhs = sigma * float(np.sum(phase.weights * np.minimum(1.0, coercivity_C * d2)))
        out["bv_dist"] = (lhs, err.bv_part)
    lhs = sigma * 0.5 * float(np.sum(varifold.w * np.sum((varifold.s - xi_atoms) ** 2, axis=1)))
    out["varifold_tilt"] = (lhs, err.value)
    out["multiplicity"] = (err.boundary_mass + err.multiplicity_defect, err.value)
    return {k: {"lhs": a, "rhs": b, "margin": b - a} for k, (a, b) in out.items()}


def kinetic_energy(phase_u: PhaseState, u_field, v_field, fluid, t, radial_panels=8):
    """int 1/2 rho(chi_u) |u - v|^2 over the domain."""
    def sq(p):
        w = u_field.velocity(p, t) - v_field.velocity(p, t)
        return 0.5 * np.sum(w * w, axis=1)
    whole = integrate_domain(phase_u.domain, sq, 2 * phase_u.n_panels, radial_panels)
    plus = integrate_phase(phase_u, sq, radial_panels)
    return fluid.rho_minus * whole + (fluid.rho_plus - fluid.rho_minus) * plus


def bulk_error(sd: SymmetricDifference, weight: WeightField, t):
    """int |chi_u - chi_v| |weight| over the symmetric difference."""
    if len(sd.points) == 0:
        return 0.0
    return sd.integrate(np.abs(weight(sd.points, t)), signed=False)


# ---------------------------------------------------------------------------
# solution pairs
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SolutionPair:
    """A strong fixture and a weak candidate.

    ``weak_phase(t)`` gives the weak phase, ``weak_velocity`` the weak
    velocity field, and ``varifold(phase)`` the weak varifold (the exact
    lift by default).
    """

    strong: object
    weak_phase: Callable
    weak_velocity: object
    loc: Localization | None = None
    varifold: Callable = lift_phase_to_varifold
    label: str = "pair"
    n_panels: int = 256
    sd_panels: int = 64
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.loc is None:
            self.loc = resolve_localization(self.strong)

    @property
    def calibration(self) -> GlobalCalibration:
        if "cal" not in self._cache:
            self._cache["cal"] = GlobalCalibration(self.strong, self.loc)
        return self._cache["cal"]

    @property
    def weight(self) -> WeightField:
        if "weight" not in self._cache:
            self._cache["weight"] = WeightField(self.strong, self.loc)
        return self._cache["weight"]

    @property
    def sigma(self):
        return self.strong.fluid.sigma

    def strong_phase(self, t):
        return PhaseState.from_interface(self.strong.interfaces[0], self.strong.domain, t,
                                         self.n_panels)

    def difference(self, t) -> SymmetricDifference:
        return symmetric_difference(self.weak_phase(t), self.strong_phase(t), self.sd_panels)

    def xi_at(self, t):
        cal = self.calibration
        return lambda p: cal(p, t)

    def distance_at(self, t):
        iface = self.strong.interfaces[0]
        return lambda p: geo.distance_to_interface(iface, p, t)


@dataclass
class EntropyReport:
    t: float
    E: float
    kinetic: float
    interface: InterfaceError
    E_vol: float | None = None
    controls: dict = field(default_factory=dict)

    def row(self):
        out = {"t": self.t, "E": self.E, "kinetic": self.kinetic, "E_vol": self.E_vol}
        out.update(self.interface.as_dict())
        for k, v in self.controls.items():
            out[f"margin_{k}"] = v["margin"]
        return out


def relative_entropy(pair: SolutionPair, t, with_bulk=True, with_controls=True,
                     coercivity_C=None) -> EntropyReport:
    """Kinetic plus interface error at one time, with optional bulk error and controls."""
    phase = pair.weak_phase(t)
    varifold = pair.varifold(phase)
    xi = pair.xi_at(t)
    err = interface_error(phase, varifold, xi, pair.sigma)
    kin = kinetic_energy(phase, pair.weak_velocity, pair.strong.velocity, pair.strong.fluid, t)
    rep = EntropyReport(float(t), kin + err.value, kin, err)
    if with_bulk:
        rep.E_vol = bulk_error(pair.difference(t), pair.weight, t)
    if with_controls:
        rep.controls = tilt_excess_controls(phase, varifold, xi, pair.sigma, pair.distance_at(t),
                                            coercivity_C, err)
    return rep


# ---------------------------------------------------------------------------
# relative entropy inequality
# ---------------------------------------------------------------------------

SURFACE_TERMS = ("tilt_stretch", "multiplicity_stretch", "boundary_stretch", "curvature_transport",
                 "xi_transport", "xi_normal_stretch", "xi_length", "compression")
BULK_TERMS = ("R_dt", "R_adv_density", "R_adv_quadratic")


def _grad_divergence(cal, p, t, h=1e-5):
    out = np.empty_like(p)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        out[:, j] = (cal.divergence(p + e, t) - cal.divergence(p - e, t)) / (2.0 * h)
    return out


def _quad(a, g, b):
    """a . (g b) per sample for gradient tensors g[k, i, j] = d_j v_i."""
    return np.einsum("ki,kij,kj->k", a, g, b)


def inequality_rates(pair: SolutionPair, t):
    """Time integrands of every term in the relative entropy inequality at one time."""
    sigma, fluid = pair.sigma, pair.strong.fluid
    v_field, u_field = pair.strong.velocity, pair.weak_velocity
    cal = pair.calibration
    phase = pair.weak_phase(t)
    var = pair.varifold(phase)
    domain = phase.domain
    on_bd = var.on_boundary(domain)

    xa = cal.jets(var.x, t)
    xi_a = xa.val
    if not np.all(np.isfinite(xi_a)):
        raise CalibrationDomainMiss("extension field undefined at a varifold atom")
    g_a = v_field.grad(var.x, t)
    xn = cal.jets(phase.nodes, t)
    xi_n, n_u, w_n = xn.val, phase.normals, phase.weights
    x_n = phase.nodes
    v_n, g_n = v_field.velocity(x_n, t), v_field.grad(x_n, t)

    rates = {}
    d = var.s - xi_a
    rates["tilt_stretch"] = -sigma * float(np.sum(var.w * _quad(d, g_a, d)))
    stretch = _quad(xi_a, g_a, xi_a)
    inner = ~on_bd
    rates["multiplicity_stretch"] = sigma * float(np.sum(((1.0 - var.theta) * var.w * stretch)[inner]))
    rates["boundary_stretch"] = sigma * float(np.sum((var.w * stretch)[on_bd]))

    sd = pair.difference(t)
    du = u_field.velocity(sd.points, t) - v_field.velocity(sd.points, t)
    moving = np.any(du != 0.0)
    if moving:
        gdiv = _grad_divergence(cal, sd.points, t)
        rates["curvature_transport"] = sigma * sd.integrate(np.sum(du * gdiv, axis=1))
    else:
        rates["curvature_transport"] = 0.0

    m = n_u - xi_n
    rates["xi_transport"] = -sigma * float(np.sum(w_n * np.sum(m * transport_residual(xn, v_n, g_n), axis=1)))
    rates["xi_normal_stretch"] = -sigma * float(np.sum(w_n * np.sum(m * xi_n, axis=1)
                                                      * _quad(xi_n, g_n, xi_n)))
    adv = xn.dt + np.einsum("kij,kj->ki", xn.jacobian, v_n)
    rates["xi_length"] = -sigma * float(np.sum(w_n * np.sum(xi_n * adv, axis=1)))
    div_v = g_n[:, 0, 0] + g_n[:, 1, 1]
    rates["compression"] = sigma * float(np.sum(w_n * (1.0 - np.sum(n_u * xi_n, axis=1)) * div_v))

    drho = fluid.rho_plus - fluid.rho_minus
    if moving:
        gv = v_field.grad(sd.points, t)
        vv = v_field.velocity(sd.points, t)
        rates["R_dt"] = drho * sd.integrate(np.sum(du * v_field.dt(sd.points, t), axis=1))
        rates["R_adv_density"] = -drho * sd.integrate(np.sum(du * np.einsum("kij,kj->ki", gv, vv), axis=1))
    else:
        rates["R_dt"] = rates["R_adv_density"] = 0.0

    def quadratic(p):
        w = u_field.velocity(p, t) - v_field.velocity(p, t)
        return _quad(w, v_field.grad(p, t), w)

    def shear(p):
        gw = u_field.grad(p, t) - v_field.grad(p, t)
        sym = gw + np.transpose(gw, (0, 2, 1))
        return np.sum(sym * sym, axis=(1, 2))

    if moving:
        whole = integrate_domain(domain, quadratic, 2 * phase.n_panels)
        plus = integrate_phase(phase, quadratic)
        rates["R_adv_quadratic"] = -(fluid.rho_minus * whole + drho * plus)
        # the viscous prefactor is half the shear viscosity
        rates["dissipation"] = 0.5 * fluid.mu * integrate_domain(domain, shear, 2 * phase.n_panels)
    else:
        rates["R_adv_quadratic"] = rates["dissipation"] = 0.0
    return rates


def _trapezoid(values, dt):
    values = np.asarray(values, dtype=float)
    return float(dt * (np.sum(values) - 0.5 * (values[0] + values[-1])))


def rel_entropy_inequality_terms(pair: SolutionPair, t_end, dt, levels=4, rates=None):
    """Integrated inequality terms on nested time grids dt, dt/2, ...

    Returns a list (coarse to fine) of dicts with every integrated term,
    E(0), E(t_end) and the margin
    ``E(t_end) + dissipation - E(0) - R_dt - R_adv - R_surTen``.
    Raises TimeSamplingTooCoarse when the first halving moves the margin by
    more than 10% of the size of the balance.
    """
    fine = dt / 2 ** (levels - 1)
    n_fine = int(round(t_end / fine))
    if abs(n_fine * fine - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a multiple of dt")
    times = np.linspace(0.0, t_end, n_fine + 1)
    if rates is None:
        rates = [inequality_rates(pair, float(t)) for t in times]
    e0 = relative_entropy(pair, 0.0, with_bulk=False, with_controls=False).E
    e1 = relative_entropy(pair, t_end, with_bulk=False, with_controls=False).E
    keys = SURFACE_TERMS + BULK_TERMS + ("dissipation",)
    out = []
    for level in range(levels):
        stride = 2 ** (levels - 1 - level)
        sub = rates[::stride]
        h = fine * stride
        row = {k: _trapezoid([r[k] for r in sub], h) for k in keys}
        row["R_surTen"] = sum(row[k] for k in SURFACE_TERMS)
        row["R_adv"] = row["R_adv_density"] + row["R_adv_quadratic"]
        row.update({"dt": h, "E_start": e0, "E_end": e1})
        row["margin"] = e1 + row["dissipation"] - e0 - row["R_dt"] - row["R_adv"] - row["R_surTen"]
        row["scale"] = abs(e0) + abs(e1) + sum(abs(row[k]) for k in keys)
        out.append(row)
    if len(out) > 1:
        change = abs(out[0]["margin"] - out[1]["margin"])
        if change > 0.1 * out[0]["scale"] and change > 1e-12:
            raise TimeSamplingTooCoarse(
                f"margin moved by {change:.3g} under one halving of dt={dt:g}")
    return out


def margin_convergence(rows, floor=1e-11):
    """Discretization tolerances of successive levels and their reduction factors.

    The tolerance of a level is its distance to the next finer margin.  When
    every margin is below ``floor`` the balance is exact and reported so.
    """
    margins = np.array([r["margin"] for r in rows])
    tol = np.abs(np.diff(margins))
    exact = bool(np.all(np.abs(margins) <= floor))
    factors = tol[:-1] / np.maximum(tol[1:], 1e-300)
    return {"margins": margins.tolist(), "tolerances": tol.tolist(),
            "reduction_factors": factors.tolist(), "exact": exact}


# ---------------------------------------------------------------------------
# bulk error evolution and slicing
# ---------------------------------------------------------------------------

def bulk_error_rate(pair: SolutionPair, t):
    """Both integrals on the right of the bulk error evolution identity (as rates)."""
    weight = pair.weight
    sd = pair.difference(t)
    w = weight.jets(sd.points, t)
    v = pair.strong.velocity.velocity(sd.points, t)
    u = pair.weak_velocity.velocity(sd.points, t)
    advective = sd.integrate(w.dt + np.sum(v * w.grad, axis=1))
    relative = sd.integrate(np.sum((u - v) * w.grad, axis=1))
    return advective, relative


def bulk_error_rate_check(pair: SolutionPair, t, h=1e-3):
    """Central difference of the bulk error against the right side of its identity."""
    lhs = (bulk_error(pair.difference(t + h), pair.weight, t + h)
           - bulk_error(pair.difference(t - h), pair.weight, t - h)) / (2.0 * h)
    adv, rel = bulk_error_rate(pair, t)
    return {"t": t, "h": h, "fd_rate": lhs, "advective": adv, "relative": rel,
            "gap": abs(lhs - adv - rel)}


def slicing_coercivity_check(pair: SolutionPair, t_end, n_times=11, deltas=None):
    """Smallest C with the slicing inequality on a grid of delta in (0, 1].

    Time integrals use the trapezoid rule on ``n_times`` points.
    """
    deltas = np.array([1.0, 0.5, 0.25, 0.1, 0.05]) if deltas is None else np.asarray(deltas)
    times = np.linspace(0.0, t_end, n_times)
    h = times[1] - times[0] if n_times > 1 else 0.0
    lhs_t, ent_t, grad_t = [], [], []
    for t in times:
        t = float(t)
        sd = pair.difference(t)
        u = pair.weak_velocity.velocity(sd.points, t)
        v = pair.strong.velocity.velocity(sd.points, t)
        lhs_t.append(sd.integrate(np.linalg.norm(u - v, axis=1), signed=False))
        rep = relative_entropy(pair, t, with_controls=False)
        ent_t.append(rep.E + rep.E_vol)

        def grad_sq(p, t=t):
            g = pair.weak_velocity.grad(p, t) - pair.strong.velocity.grad(p, t)
            return np.sum(g * g, axis=(1, 2))
        grad_t.append(integrate_domain(pair.strong.domain, grad_sq))
    lhs, ent, grad = (_trapezoid(x, h) if n_times > 1 else 0.0 for x in (lhs_t, ent_t, grad_t))
    need = [d * (lhs - d * grad) / ent if ent > 0 else (0.0 if lhs <= d * grad else np.inf)
            for d in deltas]
    c_fit = max(0.0, float(np.max(need)))
    rows = [{"delta": float(d), "lhs": lhs, "rhs": c_fit / d * ent + d * grad,
             "margin": c_fit / d * ent + d * grad - lhs} for d in deltas]
    return {"C": c_fit, "finite": bool(np.isfinite(c_fit)), "lhs": lhs, "entropy_integral": ent,
            "gradient_integral": grad, "rows": rows}
