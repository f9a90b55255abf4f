"""Extension of the interface normal near a moving contact point.

Two building blocks are expanded to second order in the signed distances:
one around the interface, one around the domain boundary.  In the two
interpolation wedges they are blended with an angular profile, and the result
is normalized to unit length.
"""

from __future__ import annotations

import numpy as np

from . import geometry as geo
from .calibration_bulk import check_fixture, length_residual, normal_rays, transport_residual
from .jets import Jet, VJet, blend
from .orderfit import SampleReport
from .profiles import interp_lambda as _lam, interp_lambda_prime as _lam_prime

NORMALIZATION_FLOOR = 0.5
NORMALIZATION_MARGIN = 0.05


class NormalizationUnsafe(ValueError):
    """The un-normalized contact field is too short; the ball is too large."""


class AtContactPoint(ValueError):
    pass


def frame_at(scene, t, key):
    """Contact frame at time t for ``key = (interface_index, end)``."""
    for f in geo.locate_contact_points(scene, float(t)):
        if (f.interface_index, f.end) == tuple(key):
            return f
    raise geo.GeometryError(f"no contact point {key} at t={t}")


def _alphas(frame):
    return -frame.H_bd, -frame.H_if


class ContactExtension:
    """Contact-point extension for one contact point of a scene.

    ``fd_step`` is the time step of the central difference used for the rates
    of the two expansion coefficients.
    """

    def __init__(self, scene, key, r_hat_c=None, fd_step=1e-4):
        self.scene = scene
        self.key = tuple(key)
        self.iface = scene.interfaces[self.key[0]]
        self.r_hat_c = r_hat_c
        self.fd_step = fd_step
        self._frames = {}

    def frame(self, t):
        t = float(t)
        if t not in self._frames:
            self._frames[t] = frame_at(self.scene, t, self.key)
        return self._frames[t]

    def coefficients(self, t):
        """``(alpha_T, d alpha_T/dt, alpha_bd, d alpha_bd/dt)``."""
        h = self.fd_step
        a_t, a_b = _alphas(self.frame(t))
        p_t, p_b = _alphas(frame_at(self.scene, t + h, self.key))
        m_t, m_b = _alphas(frame_at(self.scene, t - h, self.key))
        return a_t, (p_t - m_t) / (2 * h), a_b, (p_b - m_b) / (2 * h)

    # building blocks ------------------------------------------------------
    def blocks(self, p, t):
        """Interface and boundary blocks (un-normalized) as jets."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        f = self.frame(t)
        n = len(p)
        a_t, da_t, a_b, da_b = self.coefficients(t)
        ich = self.iface.jets(p, t, f.orientation)
        bch = self.scene.domain.jets(p, f.orientation)
        xi_t = _expansion(ich.n, ich.tau(f.orientation), ich.s, Jet.time_function(a_t, da_t, n))
        xi_b = _expansion(bch.tau(f.orientation), bch.n, bch.s, Jet.time_function(a_b, da_b, n))
        return xi_t, xi_b, ich, bch

    def interp(self, p, t, side):
        return interp_lambda(p, t, self.frame(t), side)

    def labels(self, p, t):
        phi, r = self.frame(t).polar(p)
        return geo.classify_angles(phi, r, np.inf)

    def unnormalized(self, p, t):
        """Wedge-wise assembly; returns the jet and the wedge labels."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        xi_t, xi_b, _, _ = self.blocks(p, t)
        lab = self.labels(p, t)
        out = VJet.zeros(len(p))
        m_t = lab == "W_T"
        out.put(m_t, xi_t.subset(m_t))
        m_b = (lab == "W_bd+") | (lab == "W_bd-")
        out.put(m_b, xi_b.subset(m_b))
        for side in ("+", "-"):
            m = lab == "W_Omega" + side
            if np.any(m):
                lam = self.interp(p[m], t, side)
                out.put(m, blend(lam, xi_t.subset(m), xi_b.subset(m)))
        return out, lab

    def jets(self, p, t, check=True) -> VJet:
        hat, _ = self.unnormalized(p, t)
        length = hat.norm2().sqrt()
        if check and np.any(length.val < NORMALIZATION_FLOOR):
            raise NormalizationUnsafe(
                f"|xi_hat| = {np.min(length.val):.3g} < 1/2; shrink the contact ball")
        return hat.scale(length.reciprocal())

    def __call__(self, p, t):
        return self.jets(p, t).val

    def in_ball(self, p, t, radius=None):
        radius = self.r_hat_c if radius is None else radius
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return np.linalg.norm(p - self.frame(t).c, axis=1) < radius


def _expansion(lead: VJet, side: VJet, s: Jet, alpha: Jet) -> VJet:
    """``lead + alpha s side - (alpha s)^2 / 2 lead``."""
    a_s = alpha * s
    return lead.scale(1.0 - 0.5 * a_s.square()) + side.scale(a_s)


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------

def xi_aux_interface(scene, p, t, frame):
    return ContactExtension(scene, (frame.interface_index, frame.end)).blocks(p, t)[0].val


def xi_aux_boundary(scene, p, t, frame):
    return ContactExtension(scene, (frame.interface_index, frame.end)).blocks(p, t)[1].val


def interp_lambda(p, t, frame, side) -> Jet:
    """Angular interpolation weight of the wedge on the given side ("+" or "-").

    The time derivative is exact: it follows the contact point velocity and
    the rotation rate of the frame.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    n = len(p)
    rel = p - frame.c
    if np.any(np.linalg.norm(rel, axis=1) == 0.0):
        raise AtContactPoint("interpolation weight is undefined at the contact point")
    dx = np.zeros((n, 3))
    dx[:, 0], dx[:, 2] = 1.0, -frame.c_dot[0]
    dy = np.zeros((n, 3))
    dy[:, 1], dy[:, 2] = 1.0, -frame.c_dot[1]
    d = VJet(Jet(rel[:, 0], dx), Jet(rel[:, 1], dy))
    key = "T" + side
    X = VJet.time_function(frame.X(key), frame.direction_rates[key], n)
    u = X.dot(d) / d.norm2().sqrt()
    return u.apply(_lam, _lam_prime)


def xi_contact(scene, p, t, frame, check=True):
    """Normalized contact extension (value, Jacobian, time derivative)."""
    xi = ContactExtension(scene, (frame.interface_index, frame.end)).jets(p, t, check)
    return xi.val, xi.jacobian, xi.dt


def contact_normalization_radius(scene, frame, r_hi, rel_tol=1e-3):
    """Largest r <= r_hi with sampled min |xi_hat| >= 1/2 + margin on B_r(c)."""
    ext = ContactExtension(scene, (frame.interface_index, frame.end))
    target = NORMALIZATION_FLOOR + NORMALIZATION_MARGIN

    def ok(r):
        pts = geo._disk_samples(frame.c, r)
        pts = pts[scene.domain.signed_distance(pts) >= 0.0]
        hat, _ = ext.unnormalized(pts, frame.t)
        return bool(np.min(np.sqrt(hat.norm2().val)) >= target)

    return geo._bisect(ok, r_hi, rel_tol)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def _rays_near_contact(ext, t, r_hat, distances, n_base=6):
    """Normal rays from interface points at distance 0.3..0.7 r_hat from c."""
    f = ext.frame(t)
    iface = ext.iface
    u = np.linspace(0.0, 1.0, 4001)
    pts = iface.point(u, t)
    rho = np.linalg.norm(pts - f.c, axis=1)
    pick = np.flatnonzero((rho >= 0.3 * r_hat) & (rho <= 0.7 * r_hat))
    if pick.size == 0:
        raise geo.DegenerateGeometry("no interface points inside the contact ball")
    pick = pick[np.linspace(0, pick.size - 1, n_base).astype(int)]
    return normal_rays(iface, t, u[pick], distances, ext.scene.domain)


def _polar_points(f, phis, radii):
    pp, rr = np.meshgrid(phis, radii, indexing="ij")
    pp, rr = pp.ravel(), rr.ravel()
    pts = f.c + rr[:, None] * (np.cos(pp)[:, None] * f.n_bd + np.sin(pp)[:, None] * f.n_if)
    return pts, rr, pp


def verify_contact_properties(scene, key, r_hat_c, times=None, n_base=6) -> SampleReport:
    """Residual samples and order fits for one contact point.

    Checks: ``transport`` and ``length`` of the normalized field, ``compat``
    (|xi_bulk - xi_c|) and ``compat_normal`` (xi_bulk . (xi_bulk - xi_c)) on
    normal rays; ``first_order`` (|interface block - boundary block| against
    the distance to c); ``aux_length`` (|1 - |interface block|^2|);
    ``jump`` across the shared wedge rays; ``lambda_adv`` and
    ``lambda_grad_dist`` (|grad lambda| times the distance to c) near c.
    """
    times = np.linspace(0.0, scene.horizon, 3) if times is None else np.atleast_1d(times)
    check_fixture(scene, times)
    ext = ContactExtension(scene, key, r_hat_c)
    report = SampleReport()
    distances = np.logspace(-3, np.log10(0.25 * r_hat_c), 8)
    for t in times:
        t = float(t)
        f = ext.frame(t)
        pts, dist, _ = _rays_near_contact(ext, t, r_hat_c, distances, n_base)
        xi = ext.jets(pts, t)
        v = scene.velocity.velocity(pts, t)
        gv = scene.velocity.grad(pts, t)
        report.add("transport", t, dist, np.linalg.norm(transport_residual(xi, v, gv), axis=1))
        report.add("length", t, dist, length_residual(xi, v))
        bulk = ext.iface.jets(pts, t).n.val
        diff = bulk - xi.val
        report.add("compat", t, dist, np.linalg.norm(diff, axis=1))
        report.add("compat_normal", t, dist, np.sum(bulk * diff, axis=1))
        xi_t, _, ich, _ = ext.blocks(pts, t)
        report.add("aux_length", t, np.abs(ich.value.s), 1.0 - np.sum(xi_t.val ** 2, axis=1))

        # both blocks on the interpolation wedges, against the distance to c
        # asymptotic range only: curvature terms dominate near the ball edge
        radii = np.logspace(-3, np.log10(0.3 * r_hat_c), 10)
        phis = np.radians(np.concatenate([np.linspace(32, 58, 5), -np.linspace(32, 58, 5)]))
        pp, rr, _ = _polar_points(f, phis, radii)
        keep = scene.domain.signed_distance(pp) > 0.0
        xi_t, xi_b, _, _ = ext.blocks(pp[keep], t)
        report.add("first_order", t, rr[keep], np.linalg.norm(xi_t.val - xi_b.val, axis=1))

        # continuity across the four shared rays
        eps = 1e-10
        for ray in (30.0, 60.0, -30.0, -60.0):
            r = np.linspace(0.05, 0.9, 12) * r_hat_c
            a, _, _ = _polar_points(f, [np.radians(ray) - eps], r)
            b, _, _ = _polar_points(f, [np.radians(ray) + eps], r)
            keep = (scene.domain.signed_distance(a) > 0) & (scene.domain.signed_distance(b) > 0)
            jump = np.linalg.norm(ext(a[keep], t) - ext(b[keep], t), axis=1)
            report.add("jump", t, r[keep], jump)

        # advective derivative of lambda where it is not constant
        radii = np.logspace(-4, np.log10(0.9 * r_hat_c), 12)
        for side, sgn in (("+", 1.0), ("-", -1.0)):
            pp, rr, _ = _polar_points(f, [sgn * np.radians(51.0)], radii)
            keep = scene.domain.signed_distance(pp) > 0.0
            lam = interp_lambda(pp[keep], t, f, side)
            vv = scene.velocity.velocity(pp[keep], t)
            adv = lam.dt + np.sum(lam.grad * vv, axis=1)
            report.add("lambda_adv", t, rr[keep], adv)
            report.add("lambda_grad_dist", t, rr[keep],
                       np.linalg.norm(lam.grad, axis=1) * rr[keep])
    for name in ("transport", "compat", "compat_normal", "first_order", "aux_length"):
        report.fit(name)
    return report


def aux_length_identity(scene, key, t, points):
    """Largest deviation of |block|^2 from 1 + alpha^4 s^4 / 4 for both blocks.

    Holds exactly because the expansion is orthogonal in the lead and side
    directions; returns ``(interface_gap, boundary_gap)``.
    """
    ext = ContactExtension(scene, key)
    xi_t, xi_b, ich, bch = ext.blocks(points, t)
    a_t, _, a_b, _ = ext.coefficients(t)
    gap_t = np.abs(np.sum(xi_t.val ** 2, axis=1) - 1.0 - 0.25 * a_t ** 4 * ich.s.val ** 4)
    gap_b = np.abs(np.sum(xi_b.val ** 2, axis=1) - 1.0 - 0.25 * a_b ** 4 * bch.s.val ** 4)
    return float(np.max(gap_t)), float(np.max(gap_b))
