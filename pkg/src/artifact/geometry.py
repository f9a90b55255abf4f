"""Signed-distance charts, contact frames and wedge classification.

Conventions
-----------
* The domain boundary is parametrized counter-clockwise; its signed distance
  is positive inside and its gradient is the inward normal ``n = rot_ccw(T)``.
* An interface is parametrized so that its normal ``n = rot_cw(T)`` points into
  the phase Omega^+.
* Both charts report the curvature ``H = n . gamma_ss``, which equals minus
  the Laplacian of the signed distance on the curve.  The unit disk has
  ``H = 1``; a circle whose normal points to the centre has ``H = 1/R``.
* Tangents are ``tau = o * rot_ccw(n)`` with an orientation sign ``o`` that is
  fixed per contact point so that ``tau_I = -n_bd`` and ``n_I = tau_bd`` there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flows import VelocityField, zero_flow
from .jets import Jet, VJet


class GeometryError(ValueError):
    pass


class OutsideTubularBand(GeometryError):
    pass


class AngleViolation(GeometryError):
    pass


class DegenerateGeometry(GeometryError):
    pass


def rot_ccw(v):
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def rot_cw(v):
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

class PlanarCurve:
    """Static parametrized curve on ``[0, 1]``; closed curves are periodic."""

    closed = False
    extension = 0.0

    def point(self, u):
        raise NotImplementedError

    def d1(self, u):
        raise NotImplementedError

    def d2(self, u):
        raise NotImplementedError


@dataclass(frozen=True)
class Segment(PlanarCurve):
    start: tuple
    end: tuple
    extension: float = 0.25

    def point(self, u):
        u = np.asarray(u, dtype=float)[:, None]
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        return a + u * (b - a)

    def d1(self, u):
        n = np.asarray(u).shape[0]
        return np.tile(np.asarray(self.end, float) - np.asarray(self.start, float), (n, 1))

    def d2(self, u):
        return np.zeros((np.asarray(u).shape[0], 2))


@dataclass(frozen=True)
class CircleArc(PlanarCurve):
    """``center + radius * e(phi0 + u * (phi1 - phi0))``; closed if a full turn."""

    center: tuple
    radius: float
    phi0: float
    phi1: float
    extension: float = 0.1

    @property
    def closed(self):
        return abs(abs(self.phi1 - self.phi0) - 2.0 * np.pi) < 1e-12

    def _angle(self, u):
        return self.phi0 + np.asarray(u, dtype=float) * (self.phi1 - self.phi0)

    def point(self, u):
        a = self._angle(u)
        return np.asarray(self.center, float) + self.radius * np.stack([np.cos(a), np.sin(a)], 1)

    def d1(self, u):
        a = self._angle(u)
        k = self.radius * (self.phi1 - self.phi0)
        return k * np.stack([-np.sin(a), np.cos(a)], 1)

    def d2(self, u):
        a = self._angle(u)
        k = self.radius * (self.phi1 - self.phi0) ** 2
        return -k * np.stack([np.cos(a), np.sin(a)], 1)


@dataclass(frozen=True)
class Ellipse(PlanarCurve):
    a: float = 1.0
    b: float = 1.0
    closed = True

    def point(self, u):
        w = 2.0 * np.pi * np.asarray(u, dtype=float)
        return np.stack([self.a * np.cos(w), self.b * np.sin(w)], 1)

    def d1(self, u):
        w = 2.0 * np.pi * np.asarray(u, dtype=float)
        return 2.0 * np.pi * np.stack([-self.a * np.sin(w), self.b * np.cos(w)], 1)

    def d2(self, u):
        w = 2.0 * np.pi * np.asarray(u, dtype=float)
        return -(2.0 * np.pi) ** 2 * np.stack([self.a * np.cos(w), self.b * np.sin(w)], 1)


def orthogonal_arc(beta: float, radius: float) -> CircleArc:
    """Arc of the circle of given radius meeting the unit circle at 90 degrees.

    The circle is centred at distance sqrt(1 + R^2) in direction ``beta``.
    The arc is traversed clockwise about its centre, so the interface normal
    points towards the centre, H = 1/R, and Omega^+ is the cap cut off on the
    centre's side.
    """
    d = np.sqrt(1.0 + radius ** 2)
    center = d * np.array([np.cos(beta), np.sin(beta)])
    half = np.arctan(1.0 / radius)
    back = beta + np.pi
    return CircleArc(tuple(center), radius, back + half, back - half)


# ---------------------------------------------------------------------------
# nearest-point projection
# ---------------------------------------------------------------------------

def _newton_project(x, point, d1, d2, lo, hi, closed, n_seed=257, iters=30):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if closed:
        grid = np.linspace(0.0, 1.0, n_seed, endpoint=False)
    else:
        grid = np.linspace(lo, hi, n_seed)
    pts = point(grid)
    d2min = np.full(x.shape[0], np.inf)
    u = np.zeros(x.shape[0])
    chunk = max(1, 2_000_000 // n_seed)
    for k in range(0, x.shape[0], chunk):
        diff = x[k:k + chunk, None, :] - pts[None, :, :]
        dist = np.einsum("kmi,kmi->km", diff, diff)
        j = np.argmin(dist, axis=1)
        u[k:k + chunk] = grid[j]
        d2min[k:k + chunk] = dist[np.arange(j.size), j]
    for _ in range(iters):
        g = point(u)
        g1 = d1(u)
        g2 = d2(u)
        r = g - x
        f = _dot(r, g1)
        fp = _dot(g1, g1) + _dot(r, g2)
        fp = np.where(fp > 1e-300, fp, _dot(g1, g1))
        step = f / fp
        u = u - step
        if closed:
            u = np.mod(u, 1.0)
        else:
            u = np.clip(u, lo, hi)
        if np.all(np.abs(step) < 1e-15):
            break
    return u


@dataclass
class ChartEval:
    """Plain-array chart data at a batch of points."""

    s: np.ndarray
    P: np.ndarray
    n: np.ndarray
    tau: np.ndarray
    H: np.ndarray
    u: np.ndarray
    speed: np.ndarray


@dataclass
class ChartJets:
    """Chart data with first space-time derivatives."""

    s: Jet
    n: VJet
    value: ChartEval

    def tau(self, orientation) -> VJet:
        o = np.broadcast_to(np.asarray(orientation, dtype=float), (len(self.s),))
        return self.n.rot_ccw().scale(o)


def _assemble_chart(x, u, pos, g1, g2, gt, g1t, normal_side, orientation):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    speed = np.sqrt(_dot(g1, g1))
    T = g1 / speed[:, None]
    n = rot_ccw(T) if normal_side == "left" else rot_cw(T)
    H = _dot(n, g2) / speed ** 2
    s = _dot(x - pos, n)
    o = np.broadcast_to(np.asarray(orientation, dtype=float), s.shape)
    tau = o[:, None] * rot_ccw(n)
    value = ChartEval(s=s, P=pos, n=n, tau=tau, H=H, u=u, speed=speed)

    metric = speed * (1.0 - s * H)
    n_gt = _dot(n, g1t) / speed
    # the metric vanishes only at focal points, which no caller keeps
    with np.errstate(divide="ignore", invalid="ignore"):
        grad_u = T / metric[:, None]
        u_t = -(_dot(gt, T) - s * n_gt) / metric
    n_u = -(H * speed)[:, None] * T
    n_t = -n_gt[:, None] * T

    sd = np.empty((s.size, 3))
    sd[:, :2] = n
    sd[:, 2] = -_dot(gt, n)
    comps = []
    with np.errstate(invalid="ignore"):
        for i in range(2):
            d = np.empty((s.size, 3))
            d[:, :2] = n_u[:, i, None] * grad_u
            d[:, 2] = n_u[:, i] * u_t + n_t[:, i]
            comps.append(Jet(n[:, i].copy(), d))
    return ChartJets(s=Jet(s, sd), n=VJet(*comps), value=value)


# ---------------------------------------------------------------------------
# domain boundary
# ---------------------------------------------------------------------------

class DomainBoundary:
    """Closed counter-clockwise boundary curve with a tubular radius."""

    def __init__(self, curve: PlanarCurve, tubular_radius: float, name: str = "custom"):
        if not curve.closed:
            raise GeometryError("domain boundary must be a closed curve")
        self.curve = curve
        self.tubular_radius = float(tubular_radius)
        self.name = name

    def project(self, x):
        c = self.curve
        return _newton_project(x, c.point, c.d1, c.d2, 0.0, 1.0, True)

    def jets(self, x, orientation=1.0, strict=False) -> ChartJets:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = self.project(x)
        c = self.curve
        zero = np.zeros_like(x)
        out = _assemble_chart(x, u, c.point(u), c.d1(u), c.d2(u), zero, zero, "left", orientation)
        if strict:
            self._check_band(out.value.s)
        return out

    def chart(self, x, orientation=1.0, strict=True) -> ChartEval:
        return self.jets(x, orientation, strict).value

    def signed_distance(self, x):
        return self.jets(x).value.s

    def _check_band(self, s):
        if np.any(np.abs(s) >= 2.0 * self.tubular_radius):
            raise OutsideTubularBand(
                f"point at distance {np.max(np.abs(s)):.3g} outside band of half-width "
                f"{2.0 * self.tubular_radius:.3g}")

    def contains(self, x, tol=0.0):
        return self.signed_distance(x) >= -tol

    def sample(self, n):
        u = (np.arange(n) + 0.5) / n
        return self.curve.point(u)

    def describe(self):
        return {"kind": self.name}


class DiskBoundary(DomainBoundary):
    """Circle of given radius about the origin, with closed-form projection."""

    def __init__(self, radius: float = 1.0):
        curve = CircleArc((0.0, 0.0), radius, 0.0, 2.0 * np.pi)
        super().__init__(curve, 0.5 * radius, "disk")
        self.radius = float(radius)

    def project(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.mod(np.arctan2(x[:, 1], x[:, 0]) / (2.0 * np.pi), 1.0)

    def describe(self):
        return {"kind": "disk", "radius": self.radius}


class EllipseBoundary(DomainBoundary):
    def __init__(self, a: float, b: float):
        if a <= 0 or b <= 0:
            raise GeometryError("ellipse semi-axes must be positive")
        # smallest radius of curvature bounds the tubular neighbourhood
        rmin = min(a, b) ** 2 / max(a, b)
        super().__init__(Ellipse(a, b), 0.5 * rmin, "ellipse")
        self.a, self.b = float(a), float(b)

    def describe(self):
        return {"kind": "ellipse", "a": self.a, "b": self.b}


# ---------------------------------------------------------------------------
# evolving interface
# ---------------------------------------------------------------------------

class EvolvingInterface:
    """Initial curve transported by the exact flow map of a velocity field."""

    def __init__(self, initial: PlanarCurve, flow: VelocityField | None = None,
                 touches_boundary: tuple = (True, True), radius: float | None = None,
                 name: str = "interface"):
        flow = zero_flow() if flow is None else flow
        if not flow.has_flow_map:
            raise GeometryError("interface families need a velocity field with a flow map")
        self.initial = initial
        self.flow = flow
        self.closed = initial.closed
        self.touches_boundary = (False, False) if self.closed else tuple(touches_boundary)
        self.radius = radius
        self.name = name
        ext = 0.0 if self.closed else initial.extension
        self.lo, self.hi = -ext, 1.0 + ext

    def point(self, u, t):
        return self.flow.flow_map(self.initial.point(u), t)

    def d1(self, u, t):
        return self.flow.flow_jacobian(self.initial.point(u), t, self.initial.d1(u))

    def d2(self, u, t):
        x0 = self.initial.point(u)
        a = self.initial.d1(u)
        return (self.flow.flow_hessian(x0, t, a, a)
                + self.flow.flow_jacobian(x0, t, self.initial.d2(u)))

    def dt(self, u, t):
        return self.flow.velocity(self.point(u, t), t)

    def d1t(self, u, t):
        grad = self.flow.grad(self.point(u, t), t)
        return np.einsum("kij,kj->ki", grad, self.d1(u, t))

    def project(self, x, t):
        return _newton_project(x, lambda u: self.point(u, t), lambda u: self.d1(u, t),
                               lambda u: self.d2(u, t), self.lo, self.hi, self.closed)

    def jets(self, x, t, orientation=1.0, strict=False) -> ChartJets:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = self.project(x, t)
        out = _assemble_chart(x, u, self.point(u, t), self.d1(u, t), self.d2(u, t),
                              self.dt(u, t), self.d1t(u, t), "right", orientation)
        if strict:
            self._check_band(out.value)
        return out

    def chart(self, x, t, orientation=1.0, strict=True) -> ChartEval:
        return self.jets(x, t, orientation, strict).value

    def _check_band(self, value: ChartEval):
        if self.radius is not None and np.any(np.abs(value.s) >= 2.0 * self.radius):
            raise OutsideTubularBand("point outside the interface tubular band")
        if not self.closed:
            at_end = (value.u <= self.lo + 1e-12) | (value.u >= self.hi - 1e-12)
            if np.any(at_end):
                raise OutsideTubularBand("nearest point beyond the parametrized interface")

    def in_band(self, value: ChartEval, width):
        ok = np.abs(value.s) < width
        if not self.closed:
            ok &= (value.u > self.lo + 1e-9) & (value.u < self.hi - 1e-9)
        return ok

    def curvature(self, u, t):
        g1, g2 = self.d1(u, t), self.d2(u, t)
        speed = np.sqrt(_dot(g1, g1))
        return _dot(rot_cw(g1 / speed[:, None]), g2) / speed ** 2

    def sample(self, n, t, lo=0.0, hi=1.0):
        if self.closed:
            u = np.arange(n) / n
        else:
            u = np.linspace(lo, hi, n)
        return u, self.point(u, t)

    def length(self, t, n=4000):
        nodes, weights = np.polynomial.legendre.leggauss(8)
        edges = np.linspace(0.0, 1.0, n // 8 + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        u = (mid[:, None] + half[:, None] * nodes[None]).ravel()
        w = (half[:, None] * weights[None]).ravel()
        g1 = self.d1(u, t)
        return float(np.sum(w * np.sqrt(_dot(g1, g1))))

    def describe(self):
        out = {"name": self.name, "closed": self.closed}
        out["flow"] = self.flow.describe()
        return out


# ---------------------------------------------------------------------------
# contact points and wedges
# ---------------------------------------------------------------------------

WEDGE_LABELS = ("W_T", "W_Omega+", "W_Omega-", "W_bd+", "W_bd-", "outside-ball")
_S3 = np.sqrt(3.0) / 2.0


@dataclass
class ContactFrame:
    """Frames at a contact point ``c(t)``.

    ``orientation`` is the sign ``o`` with ``tau = o * rot_ccw(n)`` for both
    the boundary and the interface frame.
    """

    t: float
    interface_index: int
    end: int
    u_param: float
    c: np.ndarray
    c_dot: np.ndarray
    n_bd: np.ndarray
    tau_bd: np.ndarray
    n_if: np.ndarray
    tau_if: np.ndarray
    orientation: float
    H_bd: float
    H_if: float
    n_bd_dot: np.ndarray
    n_if_dot: np.ndarray
    angle_residual: float
    comp_zero_residual: float
    comp_higher_residual: float
    r_c: float | None = None
    r_hat_c: float | None = None
    directions: dict = field(default_factory=dict)
    direction_rates: dict = field(default_factory=dict)

    def __post_init__(self):
        N, M = self.n_bd, self.n_if
        Nd, Md = self.n_bd_dot, self.n_if_dot
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            self.directions["T" + tag] = _S3 * N + 0.5 * sign * M
            self.directions["Omega" + tag] = 0.5 * N + _S3 * sign * M
            self.directions["bd" + tag] = -0.5 * N + _S3 * sign * M
            self.direction_rates["T" + tag] = _S3 * Nd + 0.5 * sign * Md
            self.direction_rates["Omega" + tag] = 0.5 * Nd + _S3 * sign * Md
            self.direction_rates["bd" + tag] = -0.5 * Nd + _S3 * sign * Md

    def X(self, name):
        return self.directions[name]

    def polar(self, x):
        """Angle from ``n_bd`` towards ``n_if`` and distance, for points x."""
        d = np.atleast_2d(np.asarray(x, dtype=float)) - self.c
        a = d @ self.n_bd
        b = d @ self.n_if
        return np.arctan2(b, a), np.hypot(a, b)


def classify_angles(phi, r, radius):
    """Wedge labels from polar data; shared rays go to the higher priority wedge."""
    a = np.abs(phi)
    plus = phi >= 0.0
    labels = np.empty(phi.shape, dtype=object)
    labels[:] = "outside-ball"
    inside = r <= radius
    t_mask = inside & (a <= np.pi / 6 + 1e-15)
    o_mask = inside & ~t_mask & (a <= np.pi / 3 + 1e-15)
    b_mask = inside & ~t_mask & ~o_mask
    labels[t_mask] = "W_T"
    labels[o_mask & plus] = "W_Omega+"
    labels[o_mask & ~plus] = "W_Omega-"
    labels[b_mask & plus] = "W_bd+"
    labels[b_mask & ~plus] = "W_bd-"
    return labels


def classify_wedge(p, frame: ContactFrame, radius=None):
    radius = frame.r_c if radius is None else radius
    if radius is None:
        raise GeometryError("contact frame has no localization radius")
    phi, r = frame.polar(p)
    return classify_angles(phi, r, radius)


def locate_contact_points(scene, t: float, angle_tol: float = 1e-6):
    """Contact frames of every boundary-touching interface end at time t."""
    frames = []
    domain = scene.domain
    for idx, iface in enumerate(scene.interfaces):
        for end, touches in enumerate(iface.touches_boundary):
            if not touches:
                continue
            u = np.array([float(end)])
            c = iface.point(u, t)
            g1, g2 = iface.d1(u, t), iface.d2(u, t)
            speed = np.sqrt(_dot(g1, g1))
            T = g1 / speed[:, None]
            n_if = rot_cw(T)[0]
            H_if = float(_dot(rot_cw(T), g2)[0] / speed[0] ** 2)
            bd = domain.jets(c).value
            if abs(bd.s[0]) > 1e-8 * max(1.0, np.max(np.abs(c))):
                raise DegenerateGeometry(
                    f"interface {idx} end {end} is not on the boundary (distance {bd.s[0]:.3g})")
            n_bd = bd.n[0]
            angle_res = float(abs(n_if @ n_bd))
            if angle_res > angle_tol:
                deg = np.degrees(np.arccos(np.clip(angle_res, -1.0, 1.0)))
                raise AngleViolation(
                    f"interface {idx} meets the boundary at {deg:.4f} degrees, not 90")
            o = float(np.sign(-(rot_ccw(n_if) @ n_bd)))
            tau_if = o * rot_ccw(n_if)
            tau_bd = o * rot_ccw(n_bd)
            comp0 = float(max(np.linalg.norm(n_if - tau_bd), np.linalg.norm(tau_if + n_bd)))
            v = scene.velocity.velocity(c, t)[0]
            grad_v = scene.velocity.grad(c, t)[0]
            c_dot = iface.dt(u, t)[0]
            n_gt = float(_dot(rot_cw(T), iface.d1t(u, t))[0] / speed[0])
            n_if_dot = -n_gt * T[0]
            T_bd = rot_cw(n_bd)
            n_bd_dot = -bd.H[0] * float(T_bd @ c_dot) * T_bd
            lhs = -H_if * float(tau_if @ v) + float(n_if @ (grad_v @ tau_if))
            comp_hi = abs(lhs - bd.H[0] * float(n_if @ v))
            frames.append(ContactFrame(
                t=float(t), interface_index=idx, end=end, u_param=float(end), c=c[0],
                c_dot=c_dot, n_bd=n_bd, tau_bd=tau_bd, n_if=n_if, tau_if=tau_if,
                orientation=o, H_bd=float(bd.H[0]), H_if=H_if, n_bd_dot=n_bd_dot,
                n_if_dot=n_if_dot, angle_residual=angle_res, comp_zero_residual=comp0,
                comp_higher_residual=float(comp_hi)))
    return frames


# ---------------------------------------------------------------------------
# localization radii
# ---------------------------------------------------------------------------

def _bisect(predicate, hi, rel_tol=1e-3, lo=0.0):
    """Largest r in (lo, hi] with predicate(r) true, assuming monotonicity."""
    if predicate(hi):
        return hi
    a, b = lo, hi
    while b - a > rel_tol * b:
        m = 0.5 * (a + b)
        if predicate(m):
            a = m
        else:
            b = m
    if a <= 0.0:
        raise DegenerateGeometry("no positive radius passes the localization tests")
    return a


def _disk_samples(center, radius, n_r=24, n_phi=96):
    r = radius * np.sqrt((np.arange(n_r) + 0.5) / n_r)
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    pts = np.stack([rr.ravel() * np.cos(pp.ravel()), rr.ravel() * np.sin(pp.ravel())], 1)
    edge = np.stack([radius * np.cos(phi), radius * np.sin(phi)], 1)
    return np.asarray(center) + np.vstack([pts, edge])


def interface_band_ok(iface, domain, t, r, n_u=200, n_s=17):
    """Re-projection test: points gamma(u) + s n(u), |s| < 2r, inside the
    domain project back to (u, s)."""
    u = np.linspace(0.0, 1.0, n_u, endpoint=not iface.closed)
    s = 2.0 * r * np.linspace(-1.0, 1.0, n_s)[1:-1] * 0.999
    g1 = iface.d1(u, t)
    T = g1 / np.sqrt(_dot(g1, g1))[:, None]
    n = rot_cw(T)
    base = iface.point(u, t)
    pts = (base[:, None, :] + s[None, :, None] * n[:, None, :]).reshape(-1, 2)
    uu = np.repeat(u, s.size)
    ss = np.tile(s, u.size)
    keep = domain.signed_distance(pts) > 0.0
    if not np.any(keep):
        return True
    ch = iface.jets(pts[keep], t).value
    du = np.abs(ch.u - uu[keep])
    if iface.closed:
        du = np.minimum(du, 1.0 - du)
    scale = max(1.0, iface.length(t))
    return bool(np.all(du * scale < 1e-6) and np.all(np.abs(ch.s - ss[keep]) < 1e-8))


def boundary_band_ok(domain, r, n_u=400, n_s=9):
    u = np.arange(n_u) / n_u
    c = domain.curve
    g1 = c.d1(u)
    n = rot_ccw(g1 / np.sqrt(_dot(g1, g1))[:, None])
    s = 2.0 * r * np.linspace(-1.0, 1.0, n_s)[1:-1] * 0.999
    pts = (c.point(u)[:, None, :] + s[None, :, None] * n[:, None, :]).reshape(-1, 2)
    ch = domain.jets(pts).value
    du = np.abs(ch.u - np.repeat(u, s.size))
    du = np.minimum(du, 1.0 - du)
    return bool(np.all(du < 1e-6) and np.all(np.abs(ch.s - np.tile(s, u.size)) < 1e-8))


def curve_gap(a_pts, b_pts):
    diff = a_pts[:, None, :] - b_pts[None, :, :]
    return float(np.sqrt(np.min(np.einsum("kmi,kmi->km", diff, diff))))


def contact_wedge_report(scene, frame: ContactFrame, r, n_r=24, n_phi=96):
    """Sampled checks of the wedge decomposition on B_r(c).

    Returns ``(ok, dominance_constant)``.
    """
    iface = scene.interfaces[frame.interface_index]
    t = frame.t
    pts = _disk_samples(frame.c, r, n_r, n_phi)
    pts = pts[scene.domain.signed_distance(pts) > 1e-12]
    phi, rad = frame.polar(pts)
    if np.any(np.abs(phi) > 2.0 * np.pi / 3.0):
        return False, np.inf
    labels = classify_angles(phi, rad, r * (1 + 1e-12))
    in_t = labels == "W_T"
    in_o = (labels == "W_Omega+") | (labels == "W_Omega-")
    in_b = (labels == "W_bd+") | (labels == "W_bd-")
    ich = iface.jets(pts, t).value
    bch = scene.domain.jets(pts).value
    need_if = in_t | in_o
    if np.any(need_if & ~iface.in_band(ich, 2.0 * r)):
        return False, np.inf
    # re-projection consistency of the interface chart on its wedges
    back = iface.point(ich.u, t) + ich.s[:, None] * ich.n
    if np.any(np.linalg.norm(back - pts, axis=1)[need_if] > 1e-9):
        return False, np.inf
    if np.any((in_o | in_b) & (np.abs(bch.s) >= 2.0 * scene.domain.tubular_radius)):
        return False, np.inf
    plus = labels == "W_Omega+"
    minus = labels == "W_Omega-"
    if np.any(plus & (ich.s <= 0.0)) or np.any(minus & (ich.s >= 0.0)):
        return False, np.inf
    # interface points of the ball lie in the interface wedge
    u = np.linspace(iface.lo, iface.hi, 2001)
    ip = iface.point(u, t)
    near = np.linalg.norm(ip - frame.c, axis=1) <= r
    near &= scene.domain.signed_distance(ip) > 1e-12
    if np.any(near):
        ph, rr = frame.polar(ip[near])
        if np.any(classify_angles(ph, rr, r * (1 + 1e-12)) != "W_T"):
            return False, np.inf
    # boundary points of the ball lie in the boundary wedges
    bp = scene.domain.sample(4000)
    near = (np.linalg.norm(bp - frame.c, axis=1) <= r) & (np.linalg.norm(bp - frame.c, axis=1) > 1e-9)
    if np.any(near):
        ph, rr = frame.polar(bp[near])
        lab = classify_angles(ph, rr, r * (1 + 1e-12))
        if np.any((lab != "W_bd+") & (lab != "W_bd-")):
            return False, np.inf
    dom = in_o | in_b
    if np.any(dom):
        num = np.maximum(rad[dom], np.abs(bch.s[dom]))
        const = float(np.max(num / np.maximum(np.abs(ich.s[dom]), 1e-300)))
    else:
        const = 0.0
    return True, const


@dataclass
class LocalizationRadii:
    interface: list
    contact: list
    contact_hat: list
    r_hat: float
    delta: float
    dominance: list
    times: list

    def as_dict(self):
        return {"r_i": list(self.interface), "r_c": list(self.contact),
                "r_hat_c": list(self.contact_hat), "r_hat": self.r_hat,
                "delta": self.delta, "dominance_C": list(self.dominance)}


def estimate_localization_radii(scene, times=None, safety=0.9, rel_tol=1e-3):
    """Bisection estimates of r_i, r_c, r_hat_c and the global scale r_hat.

    The searches test sampled sufficient conditions; they are stand-ins for the
    existential radii of the construction.
    """
    from .calibration_contact import contact_normalization_radius

    if times is None:
        times = np.linspace(0.0, scene.horizon, 5)
    times = [float(t) for t in np.atleast_1d(times)]
    cap = scene.domain_diameter() / 2.0

    r_i = []
    for idx, iface in enumerate(scene.interfaces):
        limit = cap if iface.radius is None else min(cap, iface.radius)
        for t in times:
            _, own = iface.sample(400, t)
            for jdx, other in enumerate(scene.interfaces):
                if jdx != idx:
                    limit = min(limit, 0.5 * curve_gap(own, other.sample(400, t)[1]))
            limit = _bisect(lambda r: interface_band_ok(iface, scene.domain, t, r), limit, rel_tol)
        r_i.append(limit)

    bd_r = _bisect(lambda r: boundary_band_ok(scene.domain, r), scene.domain.tubular_radius, rel_tol)

    frames0 = locate_contact_points(scene, times[0])
    r_c, r_hat_c, dominance = [], [], []
    for k, f0 in enumerate(frames0):
        idx = f0.interface_index
        hi = min(r_i[idx], bd_r)
        const = 0.0
        for t in times:
            f = locate_contact_points(scene, t)[k]
            hi = _bisect(lambda r: contact_wedge_report(scene, f, r)[0], hi, rel_tol)
        for t in times:
            f = locate_contact_points(scene, t)[k]
            const = max(const, contact_wedge_report(scene, f, hi)[1])
        r_c.append(hi)
        dominance.append(const)
        rh = hi
        for t in times:
            f = locate_contact_points(scene, t)[k]
            f.r_c = hi
            rh = contact_normalization_radius(scene, f, rh, rel_tol=rel_tol)
        r_hat_c.append(rh)

    r_hat = min(r_i + r_hat_c + [bd_r])
    for t in times:
        frames = locate_contact_points(scene, t)
        for a in range(len(frames)):
            for b in range(a + 1, len(frames)):
                r_hat = min(r_hat, 0.5 * float(np.linalg.norm(frames[a].c - frames[b].c)))
        for f in frames:
            for jdx, other in enumerate(scene.interfaces):
                if jdx != f.interface_index:
                    _, pts = other.sample(400, t)
                    r_hat = min(r_hat, 0.5 * float(np.min(np.linalg.norm(pts - f.c, axis=1))))
        for a in range(len(scene.interfaces)):
            for b in range(a + 1, len(scene.interfaces)):
                gap = curve_gap(scene.interfaces[a].sample(400, t)[1],
                                scene.interfaces[b].sample(400, t)[1])
                r_hat = min(r_hat, 0.5 * gap)
    r_hat *= safety
    if r_hat <= 0.0:
        raise DegenerateGeometry("global localization scale is not positive")
    delta = choose_delta(scene, r_hat, times)
    return LocalizationRadii(r_i, r_c, r_hat_c, r_hat, delta, dominance, times)


def choose_delta(scene, r_hat, times, delta=0.25, min_delta=1e-3):
    """Shrink delta until the cutoff and weight bands separate outside the balls."""
    while delta >= min_delta:
        if all(_delta_ok(scene, r_hat, delta, t) for t in times):
            return delta
        delta *= 0.5
    raise DegenerateGeometry("no admissible delta found")


def _delta_ok(scene, r_hat, delta, t, n=4000):
    width = delta * r_hat
    frames = locate_contact_points(scene, t)
    bp = scene.domain.sample(n)
    g1 = scene.domain.curve.d1((np.arange(n) + 0.5) / n)
    nb = rot_ccw(g1 / np.linalg.norm(g1, axis=1)[:, None])
    layer = np.vstack([bp + f * width * nb for f in np.linspace(0.0, 1.0, 5)])
    outside = np.ones(len(layer), dtype=bool)
    for f in frames:
        outside &= np.linalg.norm(layer - f.c, axis=1) > r_hat
    for iface in scene.interfaces:
        ch = iface.jets(layer[outside], t).value
        if np.any(np.abs(ch.s) < width):
            return False
    for f in frames:
        phi = np.linspace(-np.pi / 2, np.pi / 2, 181)
        ring = f.c + r_hat * (np.cos(phi)[:, None] * f.n_bd + np.sin(phi)[:, None] * f.n_if)
        ring = ring[scene.domain.signed_distance(ring) > 0.0]
        ph, rr = f.polar(ring)
        lab = classify_angles(ph, rr, r_hat * (1 + 1e-9))
        ich = scene.interfaces[f.interface_index].jets(ring, t).value
        bch = scene.domain.jets(ring).value
        off_t = lab != "W_T"
        if np.any(np.abs(ich.s[off_t]) <= width):
            return False
        in_o = (lab == "W_Omega+") | (lab == "W_Omega-")
        if np.any(bch.s[in_o] <= width):
            return False
    return True


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------

def distance_to_interface(iface, x, t):
    """Euclidean distance to the interface curve itself (no extension)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = _newton_project(x, lambda s: iface.point(s, t), lambda s: iface.d1(s, t),
                        lambda s: iface.d2(s, t), 0.0, 1.0, iface.closed)
    return np.linalg.norm(x - iface.point(u, t), axis=1)


def distance_to_interfaces(scene, x, t):
    return np.min(np.stack([distance_to_interface(i, x, t) for i in scene.interfaces]), axis=0)


def sample_interior(domain, n, rng, margin=0.0):
    """Uniform samples of the domain by rejection from its bounding box."""
    box = domain.sample(512)
    lo, hi = box.min(axis=0), box.max(axis=0)
    out = []
    count = 0
    while count < n:
        cand = lo + (hi - lo) * rng.random((2 * (n - count) + 16, 2))
        cand = cand[domain.signed_distance(cand) > margin]
        out.append(cand)
        count += len(cand)
    return np.vstack(out)[:n]
