"""Transported weight: a signed Lipschitz weight vanishing on the interface and
on the domain boundary, negative in Omega^+ and positive outside it.

Near an interface the weight is the truncated identity of its signed
distance, near the boundary the truncated identity of the boundary distance
with the sign of the phase, and in the interpolation wedges of a contact
point the two are blended with the angular weight.  Away from both it is the
saturated value -1 or +1.
"""

from __future__ import annotations

import numpy as np

from . import geometry as geo
from .calibration_bulk import check_fixture
from .calibration_contact import interp_lambda
from .calibration_global import Localization, resolve_localization
from .jets import Jet
from .orderfit import SampleReport
from .profiles import truncated_identity, truncated_identity_prime
from .reports import CheckResult, order_check


class WeightField:
    """Piecewise assembly of the transported weight."""

    def __init__(self, scene, loc: Localization | None = None):
        self.scene = scene
        self.loc = resolve_localization(scene) if loc is None else loc
        self._keys = [(f.interface_index, f.end) for f in geo.locate_contact_points(scene, 0.0)]

    @property
    def width(self):
        return self.loc.width

    def _profile(self, s: Jet) -> Jet:
        return (s * (1.0 / self.width)).apply(truncated_identity, truncated_identity_prime)

    def phase(self, p, t):
        """Indicator of Omega^+ (by the nearest interface when there are several)."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if len(self.scene.interfaces) == 1:
            return self.scene.chi(p, t, 0)
        dist = np.stack([geo.distance_to_interface(i, p, t) for i in self.scene.interfaces])
        owner = np.argmin(dist, axis=0)
        out = np.empty(len(p))
        for k in range(len(self.scene.interfaces)):
            m = owner == k
            if np.any(m):
                out[m] = self.scene.chi(p[m], t, k)
        return out

    def parts(self, p, t):
        """Auxiliary weights and region labels.

        Returns ``(interface_weights, boundary_weight, region)`` where the
        boundary weight already carries the phase sign and ``region`` names
        the branch used for each point.
        """
        p = np.atleast_2d(np.asarray(p, dtype=float))
        charts = [iface.jets(p, t) for iface in self.scene.interfaces]
        w_if = [-self._profile(ch.s) for ch in charts]
        # Omega^+ gets minus the profile, the exterior plus
        sign = 1.0 - 2.0 * self.phase(p, t)
        w_bd = self._profile(self.scene.domain.jets(p).s) * sign
        region = np.full(len(p), "boundary", dtype=object)
        for k, ch in enumerate(charts):
            near = np.abs(ch.s.val) < self.width
            region[near] = f"interface{k}"
        return charts, w_if, w_bd, region

    def jets(self, p, t, return_region=False):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        charts, w_if, w_bd, region = self.parts(p, t)
        out = w_bd.copy()
        for k in range(len(w_if)):
            m = region == f"interface{k}"
            if np.any(m):
                out.put(m, w_if[k].subset(m))
        r_hat = self.loc.r_hat
        for key in self._keys:
            f = geo.locate_contact_points(self.scene, t)
            f = next(x for x in f if (x.interface_index, x.end) == key)
            phi, r = f.polar(p)
            lab = geo.classify_angles(phi, r, r_hat)
            wi = w_if[key[0]]
            m = lab == "W_T"
            if np.any(m):
                out.put(m, wi.subset(m))
                region[m] = "W_T"
            for side in ("+", "-"):
                m = lab == "W_bd" + side
                sgn = -1.0 if side == "+" else 1.0
                if np.any(m):
                    out.put(m, self._profile(self.scene.domain.jets(p[m]).s) * sgn)
                    region[m] = "W_bd" + side
                m = lab == "W_Omega" + side
                if np.any(m):
                    lam = interp_lambda(p[m], t, f, side)
                    bd = self._profile(self.scene.domain.jets(p[m]).s) * sgn
                    out.put(m, lam * wi.subset(m) + (1.0 - lam) * bd)
                    region[m] = "W_Omega" + side
        if return_region:
            return out, region
        return out

    def __call__(self, p, t):
        return self.jets(p, t).val


def theta_weight(weight: WeightField, p, t):
    """Value, spatial gradient and time derivative of the weight."""
    w = weight.jets(p, t)
    return w.val, w.grad, w.dt


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def advection_constant(weight, pts, t, floor=1e-12):
    """Largest ratio |dt w + v . grad w| / |w| over samples with |w| > floor."""
    w = weight.jets(pts, t)
    v = weight.scene.velocity.velocity(pts, t)
    adv = np.abs(w.dt + np.sum(w.grad * v, axis=1))
    keep = np.abs(w.val) > floor
    return float(np.max(adv[keep] / np.abs(w.val[keep]))) if np.any(keep) else 0.0


def _wedge_pairs(weight, t, eps=1e-10, n=12):
    a, b = [], []
    r_hat = weight.loc.r_hat
    for f in geo.locate_contact_points(weight.scene, t):
        for ray in (30.0, 60.0, -30.0, -60.0):
            for r in np.linspace(0.05, 0.95, n) * r_hat:
                for sgn, bucket in ((-1.0, a), (1.0, b)):
                    phi = np.radians(ray) + sgn * eps
                    bucket.append(f.c + r * (np.cos(phi) * f.n_bd + np.sin(phi) * f.n_if))
        for phi in np.radians(np.linspace(-85.0, 85.0, 4 * n)):
            e = np.cos(phi) * f.n_bd + np.sin(phi) * f.n_if
            a.append(f.c + (r_hat - eps) * e)
            b.append(f.c + (r_hat + eps) * e)
    a, b = np.array(a), np.array(b)
    keep = (weight.scene.domain.signed_distance(a) > 0) & (weight.scene.domain.signed_distance(b) > 0)
    return a[keep], b[keep]


def verify_weight_suite(weight: WeightField, times=None, n_samples=10_000, seed=0,
                          n_boundary=1000, n_interface=1000):
    """Run the transported-weight checks.

    Returns ``(checks, report, constants)``.
    """
    scene = weight.scene
    times = np.linspace(0.0, scene.horizon, 3) if times is None else np.atleast_1d(times)
    check_fixture(scene, times)
    rng = np.random.default_rng(seed)
    per_t = max(1, n_samples // len(times))
    report = SampleReport()
    c_lower, c_adv, c_adv_half, sign_bad, zero_res, jumps = 0.0, 0.0, 0.0, 0, 0.0, 0.0
    n_classified = 0
    for t in times:
        t = float(t)
        pts = geo.sample_interior(scene.domain, per_t, rng)
        w = weight.jets(pts, t)
        d_if = geo.distance_to_interfaces(scene, pts, t)
        d_bd = scene.domain.signed_distance(pts)
        dmin = np.minimum(np.minimum(d_if, d_bd), 1.0)
        nz = np.abs(w.val) > 0.0
        c_lower = max(c_lower, float(np.max(dmin[nz] / np.abs(w.val[nz]))))
        chi = weight.phase(pts, t)
        interior = dmin > 1e-9
        bad = interior & (((chi == 1.0) & (w.val >= 0.0)) | ((chi == 0.0) & (w.val <= 0.0)))
        sign_bad += int(np.count_nonzero(bad))
        n_classified += int(np.count_nonzero(interior))
        c_adv = max(c_adv, advection_constant(weight, pts, t))
        c_adv_half = max(c_adv_half, advection_constant(weight, pts[: per_t // 2], t))

        bp = scene.domain.sample(n_boundary)
        zero_res = max(zero_res, float(np.max(np.abs(weight(bp, t)))))
        for iface in scene.interfaces:
            u = rng.uniform(0.0, 1.0, n_interface)
            zero_res = max(zero_res, float(np.max(np.abs(weight(iface.point(u, t), t)))))

        a, b = _wedge_pairs(weight, t)
        if len(a):
            jumps = max(jumps, float(np.max(np.abs(weight(a, t) - weight(b, t)))))

        # compatibility of the two auxiliary weights in the interpolation wedges
        for f in geo.locate_contact_points(scene, t):
            radii = np.logspace(-3, np.log10(0.9 * weight.loc.r_hat), 10)
            for deg in (35.0, 45.0, 55.0, -35.0, -45.0, -55.0):
                phi = np.radians(deg)
                pp = f.c + radii[:, None] * (np.cos(phi) * f.n_bd + np.sin(phi) * f.n_if)
                keep = scene.domain.signed_distance(pp) > 0
                pp = pp[keep]
                charts, w_if, _, _ = weight.parts(pp, t)
                sgn = -1.0 if deg > 0 else 1.0
                w_bd = weight._profile(scene.domain.jets(pp).s).val * sgn
                gap = np.abs(w_if[f.interface_index].val - w_bd)
                dist = np.minimum(np.abs(scene.domain.signed_distance(pp)),
                                  geo.distance_to_interfaces(scene, pp, t))
                report.add("aux_compat", t, dist, gap)

    # constants below 1e-9 are round-off of an exactly transported weight
    stable = abs(c_adv - c_adv_half) <= 0.2 * max(c_adv, c_adv_half) + 1e-9
    constants = {"lower_bound_C": c_lower, "advection_C": c_adv,
                 "advection_C_half_samples": c_adv_half, "delta_r_hat": weight.width}
    checks = [
        CheckResult("sign_pattern", sign_bad == 0, sign_bad, 0, {"classified": n_classified}),
        CheckResult("zero_on_interface_and_boundary", zero_res <= 1e-12, zero_res, 1e-12),
        CheckResult("lower_bound", np.isfinite(c_lower), c_lower, "finite"),
        CheckResult("advection_bound_stable", stable and np.isfinite(c_adv),
                    [c_adv, c_adv_half], "within 20%"),
        CheckResult("continuity", jumps <= 1e-8, jumps, 1e-8),
    ]
    if report.checks():
        checks.append(order_check("aux_compat_order", report.fit("aux_compat"), 0.9))
    return checks, report, constants
