"""Immutable scene descriptions and JSON scene files.

A scene file is a JSON object such as::

    {
      "domain": {"kind": "disk", "radius": 1.0},
      "interface": {"kind": "diameter", "angle": 0.0},
      "velocity": {"kind": "rigid", "omega": 1.0},
      "fluid": {"sigma": 1.0, "mu": 1.0, "rho_plus": 1.0, "rho_minus": 1.0},
      "horizon": 1.0
    }

Optional keys: ``"r_hat"`` and ``"delta"`` fix the localization scale instead
of estimating it, and ``"contact_angle_deg"`` tilts a diameter's ends (only
useful to exercise the angle validation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist
from shapely import contains_xy
from shapely.geometry import Polygon

from . import geometry as geo
from .flows import VelocityField, flow_from_dict, rigid_rotation


class SceneError(ValueError):
    """Invalid scene description; the message names the offending line."""


@dataclass(frozen=True)
class FluidParams:
    sigma: float = 1.0
    mu: float = 1.0
    rho_plus: float = 1.0
    rho_minus: float = 1.0

    def __post_init__(self):
        for key in ("sigma", "mu", "rho_plus", "rho_minus"):
            if not getattr(self, key) > 0.0:
                raise SceneError(f"fluid parameter {key} must be positive")

    def rho(self, chi):
        return self.rho_plus * chi + self.rho_minus * (1.0 - np.asarray(chi, dtype=float))


@dataclass(frozen=True)
class SceneSpec:
    domain: geo.DomainBoundary
    interfaces: tuple
    velocity: VelocityField
    fluid: FluidParams = field(default_factory=FluidParams)
    horizon: float = 1.0
    r_hat: float | None = None
    delta: float | None = None
    name: str = "scene"

    def domain_diameter(self):
        return float(np.max(pdist(self.domain.sample(512))))

    def contact_frames(self, t):
        return geo.locate_contact_points(self, t)

    def validate(self, angle_tol=1e-6):
        for t in np.linspace(0.0, self.horizon, 5):
            frames = geo.locate_contact_points(self, float(t), angle_tol)
            for iface in self.interfaces:
                if iface.closed:
                    _, pts = iface.sample(256, float(t))
                    if np.any(self.domain.signed_distance(pts) <= 0.0):
                        raise SceneError(f"closed interface {iface.name} leaves the domain")
            del frames
        return self

    # charts with contact-anchored orientation ------------------------------
    def _orientation_near(self, p, t):
        frames = self.contact_frames(t)
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if not frames:
            return np.ones(len(p))
        d = np.stack([np.linalg.norm(p - f.c, axis=1) for f in frames], 1)
        signs = np.array([f.orientation for f in frames])
        return signs[np.argmin(d, axis=1)]

    def boundary_chart(self, p, t=0.0, strict=True):
        return self.domain.chart(p, self._orientation_near(p, t), strict)

    def interface_chart(self, p, t=0.0, index=0, strict=True):
        return self.interfaces[index].chart(p, t, self._orientation_near(p, t), strict)

    # phase indicator ------------------------------------------------------
    def phase_polygon(self, t, index=0, n=2000):
        return phase_polygon(self.domain, self.interfaces[index], t, n)

    def chi(self, x, t, index=0):
        """Indicator of Omega^+ for one interface (1 inside the phase)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        iface = self.interfaces[index]
        ch = iface.jets(x, t).value
        near = iface.in_band(ch, 0.05 * self.domain_diameter())
        out = np.empty(len(x))
        out[near] = (ch.s[near] >= 0.0).astype(float)
        if np.any(~near):
            poly = self.phase_polygon(t, index)
            out[~near] = contains_xy(poly, x[~near, 0], x[~near, 1]).astype(float)
        return out

    def describe(self):
        return {"name": self.name, "domain": self.domain.describe(),
                "interfaces": [i.describe() for i in self.interfaces],
                "velocity": self.velocity.describe(), "horizon": self.horizon}


def boundary_arc_params(domain, a, b):
    """Boundary parameters of points a, b and the counter-clockwise span a->b."""
    ua = float(domain.project(np.atleast_2d(a))[0])
    ub = float(domain.project(np.atleast_2d(b))[0])
    return ua, (ub - ua) % 1.0


def phase_polygon(domain, iface, t, n=2000):
    """Dense polygon of Omega^+ for an interface at time t."""
    if iface.closed:
        _, pts = iface.sample(n, t)
        poly = Polygon(pts)
        signed = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if signed > 0:
            # counter-clockwise closed interface: normal points outward
            outer = Polygon(domain.sample(n))
            return outer.difference(poly)
        return poly
    _, pts = iface.sample(n, t)
    ua, span = boundary_arc_params(domain, pts[0], pts[-1])
    arc = domain.curve.point(ua + span * np.linspace(0.0, 1.0, n))
    loop = np.vstack([pts[::-1], arc[1:-1]])
    return Polygon(loop).buffer(0)


# ---------------------------------------------------------------------------
# presets and file loading
# ---------------------------------------------------------------------------

def _e(angle):
    return np.array([np.cos(angle), np.sin(angle)])


def diameter_curve(angle=0.0, end_tilt_deg=0.0):
    """Diameter of the unit disk, rotated by ``angle`` from the vertical one.

    ``end_tilt_deg`` replaces the diameter by a chord through the origin
    direction making that angle with the radial direction (for validation
    tests of non-orthogonal contact).
    """
    if end_tilt_deg:
        d = _e(np.pi / 2 + angle)
        offset = np.sin(np.radians(end_tilt_deg)) * _e(angle)
        half = np.sqrt(1.0 - np.sum(offset ** 2))
        return geo.Segment(tuple(offset - half * d), tuple(offset + half * d))
    d = _e(np.pi / 2 + angle)
    return geo.Segment(tuple(-d), tuple(d))


def make_domain(spec):
    kind = spec.get("kind", "disk")
    if kind == "disk":
        r = float(spec.get("radius", 1.0))
        if r != 1.0:
            raise SceneError("only the unit disk is supported by the velocity presets")
        return geo.DiskBoundary(r)
    if kind == "ellipse":
        return geo.EllipseBoundary(float(spec["a"]), float(spec["b"]))
    raise SceneError(f"unknown domain kind {kind!r}")


def make_interface(spec, flow, domain):
    kind = spec.get("kind", "diameter")
    if kind == "diameter":
        curve = diameter_curve(float(spec.get("angle", 0.0)), float(spec.get("end_tilt_deg", 0.0)))
        return geo.EvolvingInterface(curve, flow, name="diameter")
    if kind == "arc":
        curve = geo.orthogonal_arc(float(spec.get("beta", 0.0)), float(spec.get("radius", 1.0)))
        return geo.EvolvingInterface(curve, flow, radius=float(spec.get("radius", 1.0)), name="arc")
    if kind == "bubble":
        c = tuple(float(v) for v in spec.get("center", (0.0, 0.0)))
        r = float(spec.get("radius", 0.3))
        curve = geo.CircleArc(c, r, 0.0, 2.0 * np.pi)
        return geo.EvolvingInterface(curve, flow, radius=r, name="bubble")
    if kind == "major-axis":
        if not isinstance(domain, geo.EllipseBoundary):
            raise SceneError("major-axis interface needs an ellipse domain")
        return geo.EvolvingInterface(geo.Segment((-domain.a, 0.0), (domain.a, 0.0), 0.1),
                                     flow, name="major-axis")
    if kind == "chord":
        a = tuple(float(v) for v in spec["start"])
        b = tuple(float(v) for v in spec["end"])
        return geo.EvolvingInterface(geo.Segment(a, b, 0.1), flow, name="chord")
    raise SceneError(f"unknown interface kind {kind!r}")


def scene_from_dict(spec: dict, name="scene", validate=True) -> SceneSpec:
    domain = make_domain(spec.get("domain", {}))
    flow = flow_from_dict(spec.get("velocity", {"kind": "rigid", "omega": 1.0}))
    raw = spec.get("interfaces")
    if raw is None:
        raw = [spec.get("interface", {"kind": "diameter"})]
    interfaces = []
    for item in raw:
        if flow.has_flow_map:
            interfaces.append(make_interface(item, flow, domain))
        else:
            # numerical-only flows: calibration uses the initial geometry frozen
            interfaces.append(make_interface(item, rigid_rotation(0.0), domain))
    fluid = FluidParams(**spec.get("fluid", {}))
    scene = SceneSpec(domain=domain, interfaces=tuple(interfaces), velocity=flow, fluid=fluid,
                      horizon=float(spec.get("horizon", 1.0)),
                      r_hat=spec.get("r_hat"), delta=spec.get("delta"), name=name)
    if validate:
        scene.validate()
    return scene


def _line_of(text, key):
    needle = f'"{key}"'
    for k, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return k
    return 1


def load_scene(path, validate=True) -> SceneSpec:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(spec, dict):
        raise SceneError(f"{path}:1: scene must be a JSON object")
    try:
        return scene_from_dict(spec, name=path.stem, validate=validate)
    except geo.AngleViolation as exc:
        raise geo.AngleViolation(f"{path}:{_line_of(text, 'interface')}: {exc}") from exc
    except (SceneError, geo.GeometryError, KeyError, TypeError, ValueError) as exc:
        key = "domain"
        for candidate in ("velocity", "interface", "fluid", "horizon"):
            if candidate in str(exc):
                key = candidate
        raise SceneError(f"{path}:{_line_of(text, key)}: {exc}") from exc


def disk_diameter(velocity=None, horizon=1.0, angle=0.0, **kw) -> SceneSpec:
    """The DISK-DIAMETER fixture: unit disk cut by a diameter (vertical at angle 0)."""
    velocity = rigid_rotation(1.0) if velocity is None else velocity
    iface = geo.EvolvingInterface(diameter_curve(angle), velocity, name="diameter")
    return SceneSpec(domain=geo.DiskBoundary(1.0), interfaces=(iface,), velocity=velocity,
                     horizon=horizon, name="disk-diameter", **kw)


def with_interface_rotated(scene: SceneSpec, eps: float) -> SceneSpec:
    """Same scene with every initial interface rotated about the origin by eps."""
    out = []
    for iface in scene.interfaces:
        curve = iface.initial
        if isinstance(curve, geo.Segment):
            rot = np.array([[np.cos(eps), -np.sin(eps)], [np.sin(eps), np.cos(eps)]])
            new = geo.Segment(tuple(rot @ np.asarray(curve.start)), tuple(rot @ np.asarray(curve.end)),
                              curve.extension)
        elif isinstance(curve, geo.CircleArc):
            rot = np.array([[np.cos(eps), -np.sin(eps)], [np.sin(eps), np.cos(eps)]])
            new = geo.CircleArc(tuple(rot @ np.asarray(curve.center)), curve.radius,
                                curve.phi0 + eps, curve.phi1 + eps, curve.extension)
        else:
            raise SceneError("rotation only implemented for segments and arcs")
        out.append(geo.EvolvingInterface(new, iface.flow, iface.touches_boundary, iface.radius,
                                         iface.name))
    return replace(scene, interfaces=tuple(out), name=scene.name + f"-rot{eps:g}")
