"""Partition of unity along the interface and the stitched global field.

Every interface contributes a cutoff of its signed distance and every contact
point a cutoff of the distance to it, both on the scale ``delta * r_hat``.
Inside a contact ball the two are combined wedge by wedge, with the angular
interpolation weight on the interpolation wedges.  The global field is the
cutoff-weighted sum of the local extensions; the rest of the unit mass goes to
the bulk cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .calibration_bulk import check_fixture, length_residual, normal_rays, transport_residual
from .calibration_contact import ContactExtension, interp_lambda
from .fd import fd_divergence, fd_jacobian
from .jets import Jet, VJet
from .orderfit import SampleReport
from .profiles import zeta, zeta_prime, zeta_sq, zeta_sq_prime
from .reports import CheckResult, order_check


class CalibrationDomainMiss(ValueError):
    """A cutoff is positive where its local field has no chart."""


@dataclass(frozen=True)
class Localization:
    r_hat: float
    delta: float
    r_hat_c: tuple

    @property
    def width(self):
        return self.delta * self.r_hat


def resolve_localization(scene, times=None) -> Localization:
    """Scale parameters from the scene file, estimated where missing."""
    n_contacts = len(geo.locate_contact_points(scene, 0.0))
    if scene.r_hat is not None:
        r_hat = float(scene.r_hat)
        times = np.linspace(0.0, scene.horizon, 5) if times is None else times
        delta = float(scene.delta) if scene.delta is not None else geo.choose_delta(scene, r_hat, times)
        return Localization(r_hat, delta, tuple([r_hat] * n_contacts))
    radii = geo.estimate_localization_radii(scene, times)
    delta = float(scene.delta) if scene.delta is not None else radii.delta
    return Localization(radii.r_hat, delta, tuple(radii.contact_hat))


@dataclass
class Cutoffs:
    """Cutoff jets at a batch of points; ``labels[k]`` are the wedge labels of
    contact k (``outside-ball`` beyond r_hat)."""

    zeta_i: list
    zeta_c: list
    eta_i: list
    eta_c: list
    eta_bulk: Jet
    labels: list
    charts: list

    def total(self):
        out = self.eta_bulk.copy()
        for e in self.eta_i + self.eta_c:
            out = out + e
        return out

    def interface_sum(self):
        out = Jet(np.zeros_like(self.eta_bulk.val))
        for e in self.eta_i + self.eta_c:
            out = out + e
        return out


class GlobalCalibration:
    """Global boundary-adapted extension of the interface normal."""

    def __init__(self, scene, loc: Localization | None = None):
        self.scene = scene
        self.loc = resolve_localization(scene) if loc is None else loc
        frames = geo.locate_contact_points(scene, 0.0)
        self.contacts = [ContactExtension(scene, (f.interface_index, f.end), rc)
                         for f, rc in zip(frames, self.loc.r_hat_c)]

    @property
    def width(self):
        return self.loc.width

    def cutoffs(self, p, t) -> Cutoffs:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        w = self.width
        r_hat = self.loc.r_hat
        charts = [iface.jets(p, t) for iface in self.scene.interfaces]
        zeta_i = [(ch.s * (1.0 / w)).apply(zeta, zeta_prime) for ch in charts]
        eta_i = [z.copy() for z in zeta_i]
        zeta_c, eta_c, labels = [], [], []
        for ext in self.contacts:
            f = ext.frame(t)
            rel = p - f.c
            q = np.sum(rel * rel, axis=1)
            d = np.empty((len(p), 3))
            d[:, :2] = 2.0 * rel
            d[:, 2] = -2.0 * rel @ f.c_dot
            zc = (Jet(q, d) * (1.0 / w ** 2)).apply(zeta_sq, zeta_sq_prime)
            phi, r = f.polar(p)
            lab = geo.classify_angles(phi, r, r_hat)
            k = ext.key[0]
            zi = zeta_i[k]
            ec = zc.copy()
            m = lab == "W_T"
            if np.any(m):
                eta_i[k].put(m, (1.0 - zc.subset(m)) * zi.subset(m))
                ec.put(m, zc.subset(m) * zi.subset(m))
            for side in ("+", "-"):
                m = lab == "W_Omega" + side
                if np.any(m):
                    lam = interp_lambda(p[m], t, f, side)
                    zcm, zim = zc.subset(m), zi.subset(m)
                    eta_i[k].put(m, lam * (1.0 - zcm) * zim)
                    ec.put(m, lam * zcm * zim + (1.0 - lam) * zcm)
            m = (lab == "W_bd+") | (lab == "W_bd-")
            if np.any(m):
                eta_i[k].put(m, Jet(np.zeros(np.count_nonzero(m))))
            zeta_c.append(zc)
            eta_c.append(ec)
            labels.append(lab)
        total = Jet(np.zeros(len(p)))
        for e in eta_i + eta_c:
            total = total + e
        return Cutoffs(zeta_i, zeta_c, eta_i, eta_c, 1.0 - total, labels, charts)

    def jets(self, p, t) -> VJet:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        cut = self.cutoffs(p, t)
        out = VJet.zeros(len(p))
        for iface, ch, eta in zip(self.scene.interfaces, cut.charts, cut.eta_i):
            active = eta.val > 0.0
            if not np.any(active):
                continue
            if not iface.closed:
                u = ch.value.u[active]
                if np.any((u <= iface.lo + 1e-12) | (u >= iface.hi - 1e-12)):
                    raise CalibrationDomainMiss(
                        f"interface cutoff of {iface.name} is positive beyond its chart")
            out = out + ch.n.scale(eta)
        for ext, eta in zip(self.contacts, cut.eta_c):
            active = eta.val > 0.0
            if not np.any(active):
                continue
            local = VJet.zeros(len(p))
            local.put(active, ext.jets(p[active], t))
            out = out + local.scale(eta)
        return out

    def __call__(self, p, t):
        return self.jets(p, t).val

    def divergence(self, p, t):
        return self.jets(p, t).div


def eval_cutoffs(cal: GlobalCalibration, p, t):
    """Plain values of the cutoffs: dict of arrays."""
    cut = cal.cutoffs(p, t)
    return {"zeta_i": [z.val for z in cut.zeta_i], "zeta_c": [z.val for z in cut.zeta_c],
            "eta_i": [e.val for e in cut.eta_i], "eta_c": [e.val for e in cut.eta_c],
            "eta_bulk": cut.eta_bulk.val, "labels": cut.labels}


def xi_global(cal: GlobalCalibration, p, t):
    """Value, Jacobian and time derivative of the global field."""
    xi = cal.jets(p, t)
    return xi.val, xi.jacobian, xi.dt


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def _interface_samples(scene, n, t, rng):
    pts = []
    normals = []
    curv = []
    for iface in scene.interfaces:
        u = rng.uniform(0.0, 1.0, n)
        g1 = iface.d1(u, t)
        pts.append(iface.point(u, t))
        normals.append(geo.rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None]))
        curv.append(iface.curvature(u, t))
    return np.vstack(pts), np.vstack(normals), np.concatenate(curv)


def _ray_points(scene, t, n_rays, distances):
    pts, dist = [], []
    for iface in scene.interfaces:
        u = np.linspace(0.02, 0.98, n_rays) if not iface.closed else np.arange(n_rays) / n_rays
        a, d, _ = normal_rays(iface, t, u, distances, scene.domain)
        pts.append(a)
        dist.append(d)
    return np.vstack(pts), np.concatenate(dist)


def _matched_pairs(cal, t, eps=1e-10, n=12):
    """Pairs of points straddling wedge rays, the ball edge and cutoff edges."""
    a, b = [], []
    r_hat, w = cal.loc.r_hat, cal.width
    for ext in cal.contacts:
        f = ext.frame(t)
        radii = np.linspace(0.05, 0.95, n) * r_hat
        for ray in (30.0, 60.0, -30.0, -60.0):
            for r in radii:
                for sgn, bucket in ((-1.0, a), (1.0, b)):
                    phi = np.radians(ray) + sgn * eps
                    bucket.append(f.c + r * (np.cos(phi) * f.n_bd + np.sin(phi) * f.n_if))
        phis = np.radians(np.linspace(-85.0, 85.0, 4 * n))
        for phi in phis:
            e = np.cos(phi) * f.n_bd + np.sin(phi) * f.n_if
            a.append(f.c + (r_hat - eps) * e)
            b.append(f.c + (r_hat + eps) * e)
    for iface in cal.scene.interfaces:
        u = np.linspace(0.05, 0.95, n)
        g1 = iface.d1(u, t)
        nrm = geo.rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None])
        base = iface.point(u, t)
        for s in (w, -w, 0.5 * w, -0.5 * w):
            a.extend(base + (s - eps) * nrm)
            b.extend(base + (s + eps) * nrm)
    a, b = np.array(a), np.array(b)
    keep = (cal.scene.domain.signed_distance(a) > 0) & (cal.scene.domain.signed_distance(b) > 0)
    return a[keep], b[keep]


def verify_extension_suite(cal: GlobalCalibration, times=None, n_samples=10_000,
                          n_boundary=1000, n_interface=1000, n_rays=24,
                          distances=None, fd_step=1e-5, seed=0):
    """Run the boundary-adapted-extension checks.

    Returns ``(checks, report, constants)``: a list of :class:`CheckResult`, a
    :class:`SampleReport` with the ray samples, and fitted constants.
    """
    scene = cal.scene
    times = np.linspace(0.0, scene.horizon, 3) if times is None else np.atleast_1d(times)
    distances = np.logspace(-3, -1, 9) if distances is None else np.asarray(distances)
    check_fixture(scene, times)
    rng = np.random.default_rng(seed)
    report = SampleReport()
    checks = []
    per_t = max(1, n_samples // len(times))

    coerc_lhs, coerc_rhs, max_len = [], [], 0.0
    bulk_ratio, sum_dev, disjoint = [], 0.0, 0.0
    bd_res, if_res, div_res, jet_div_res, pou_res, jumps = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    for t in times:
        t = float(t)
        # (a) coercivity and bulk cutoff bounds on random samples
        pts = geo.sample_interior(scene.domain, per_t, rng)
        dist = geo.distance_to_interfaces(scene, pts, t)
        cut = cal.cutoffs(pts, t)
        xi = cal(pts, t)
        length = np.linalg.norm(xi, axis=1)
        max_len = max(max_len, float(np.max(length)))
        nz = (length > 0.0) & (dist > 1e-9)
        coerc_lhs.append(1.0 - length[nz])
        coerc_rhs.append(dist[nz] ** 2)
        capped = np.minimum(dist ** 2, 1.0)
        keep = capped > 1e-18
        bulk_ratio.append(cut.eta_bulk.val[keep] / capped[keep])
        sum_dev = max(sum_dev, float(np.max(np.abs(cut.total().val - 1.0))))
        feats = cut.eta_i + cut.eta_c
        kinds = ["i"] * len(cut.eta_i) + ["c"] * len(cut.eta_c)
        for x in range(len(feats)):
            for y in range(x + 1, len(feats)):
                if kinds[x] == kinds[y]:
                    disjoint = max(disjoint, float(np.max(feats[x].val * feats[y].val)))

        # (b) tangential boundary values
        bp = scene.domain.sample(n_boundary)
        bd_res = max(bd_res, float(np.max(np.abs(np.sum(cal(bp, t) * scene.domain.chart(bp).n, 1)))))

        # (c) interface values and divergence
        ip, nrm, H = _interface_samples(scene, n_interface, t, rng)
        xj = cal.jets(ip, t)
        if_res = max(if_res, float(np.max(np.linalg.norm(xj.val - nrm, axis=1))))
        jet_div_res = max(jet_div_res, float(np.max(np.abs(xj.div + H))))
        fd_div = fd_divergence(lambda q: cal(q, t), ip, fd_step)
        div_res = max(div_res, float(np.max(np.abs(fd_div + H))))
        pou_res = max(pou_res, float(np.max(np.abs(cal.cutoffs(ip, t).interface_sum().val - 1.0))))

        # (d)-(f) residual orders along normal rays
        rp, rd = _ray_points(scene, t, n_rays, distances)
        xj = cal.jets(rp, t)
        v = scene.velocity.velocity(rp, t)
        gv = scene.velocity.grad(rp, t)
        report.add("transport", t, rd, np.linalg.norm(transport_residual(xj, v, gv), axis=1))
        report.add("length", t, rd, length_residual(xj, v))
        eb = cal.cutoffs(rp, t).eta_bulk
        report.add("bulk_cutoff_advection", t, rd, eb.dt + np.sum(eb.grad * v, axis=1))

        # continuity across wedge rays, ball edges and cutoff edges
        a, b = _matched_pairs(cal, t)
        if len(a):
            jumps = max(jumps, float(np.max(np.linalg.norm(cal(a, t) - cal(b, t), axis=1))))

    lhs, rhs = np.concatenate(coerc_lhs), np.concatenate(coerc_rhs)
    c_fit = float(np.min(lhs / rhs)) if lhs.size else np.inf
    ratios = np.concatenate(bulk_ratio)
    lo, hi = float(np.min(ratios)), float(np.max(ratios))
    constants = {"coercivity_C": c_fit, "bulk_cutoff_lower": lo, "bulk_cutoff_upper": hi,
                 "max_length": max_len}
    checks.append(CheckResult("coercivity", c_fit > 0 and np.isfinite(c_fit) and max_len <= 1 + 1e-12,
                              c_fit, "> 0", {"samples": int(lhs.size), "max_length": max_len}))
    checks.append(CheckResult("boundary_tangential", bd_res <= 1e-10, bd_res, 1e-10))
    checks.append(CheckResult("interface_value", if_res <= 1e-10, if_res, 1e-10))
    checks.append(CheckResult("divergence_fd", div_res <= 1e-6, div_res, 1e-6, {"fd_step": fd_step}))
    checks.append(CheckResult("divergence_jet", jet_div_res <= 1e-9, jet_div_res, 1e-9))
    checks.append(order_check("transport_order", report.fit("transport"), 0.9))
    checks.append(order_check("length_order", report.fit("length"), 1.9))
    checks.append(order_check("bulk_cutoff_advection_order", report.fit("bulk_cutoff_advection"), 1.9))
    checks.append(CheckResult("partition_on_interface", pou_res <= 1e-10, pou_res, 1e-10))
    checks.append(CheckResult("partition_total", sum_dev <= 1e-14, sum_dev, 1e-14))
    checks.append(CheckResult("bulk_cutoff_two_sided", 0 < lo and np.isfinite(hi), [lo, hi], "(0, inf)"))
    checks.append(CheckResult("support_disjoint", disjoint == 0.0, disjoint, 0.0))
    checks.append(CheckResult("continuity", jumps <= 1e-8, jumps, 1e-8))
    return checks, report, constants


def fd_jacobian_check(cal, p, t, h=1e-5):
    """Largest gap between the jet Jacobian and central differences."""
    jac = cal.jets(p, t).jacobian
    fd = fd_jacobian(lambda q: cal(q, t), p, h)
    return float(np.max(np.abs(jac - fd)))
