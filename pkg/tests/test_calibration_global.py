import numpy as np
import pytest

from artifact import geometry as geo
from artifact.calibration_global import (CalibrationDomainMiss, GlobalCalibration, Localization,
                                         eval_cutoffs, fd_jacobian_check, resolve_localization,
                                         verify_extension_suite, xi_global)
from artifact.profiles import zeta
from artifact.scene import disk_diameter, scene_from_dict


def _by_name(checks):
    return {c.name: c for c in checks}


def test_cutoff_profile_values():
    np.testing.assert_allclose(zeta(np.array([0.0, 0.25, 0.5, 1.0, 1.5])),
                               [1.0, 0.9375, 0.75, 0.0, 0.0], atol=1e-15)


def test_cutoffs_on_interface_away_from_contacts(rigid_cal):
    pts = np.stack([np.zeros(5), np.linspace(-0.3, 0.3, 5)], 1)
    cut = eval_cutoffs(rigid_cal, pts, 0.0)
    np.testing.assert_allclose(cut["eta_i"][0], 1.0, atol=1e-15)
    np.testing.assert_allclose(cut["eta_bulk"], 0.0, atol=1e-15)


def test_bulk_cutoff_at_half_width(rigid_cal):
    w = rigid_cal.width
    cut = eval_cutoffs(rigid_cal, np.array([[w / 2, 0.0], [-w / 2, 0.1]]), 0.0)
    np.testing.assert_allclose(cut["eta_bulk"], 0.25, atol=1e-14)


def test_partition_inside_interface_wedge(rigid_cal):
    f = next(x for x in geo.locate_contact_points(rigid_cal.scene, 0.0) if x.c[1] > 0)
    pts = f.c + np.linspace(0.01, 0.9, 20)[:, None] * rigid_cal.loc.r_hat * f.n_bd
    cut = eval_cutoffs(rigid_cal, pts, 0.0)
    assert set(cut["labels"][f.end]) == {"W_T"}
    total = cut["eta_i"][0] + sum(cut["eta_c"])
    np.testing.assert_allclose(total, 1.0, atol=1e-15)


def test_field_on_interface_is_normal(rigid_cal, rng):
    iface = rigid_cal.scene.interfaces[0]
    for t in (0.0, 0.6):
        u = rng.uniform(0.0, 1.0, 300)
        g1 = iface.d1(u, t)
        nrm = geo.rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None])
        assert np.max(np.abs(rigid_cal(iface.point(u, t), t) - nrm)) < 1e-12


def test_field_vanishes_far_from_interface_and_boundary(rigid_cal):
    w = rigid_cal.width
    pts = np.array([[0.5, 0.0], [-0.5, 0.1], [0.4, -0.3]])
    assert np.all(np.abs(pts[:, 0]) > w)
    assert np.max(np.abs(rigid_cal(pts, 0.0))) == 0.0


def test_single_cutoff_example():
    scene = disk_diameter()
    cal = GlobalCalibration(scene, Localization(1.6, 0.25, (0.5, 0.5)))
    np.testing.assert_allclose(cal(np.array([[0.1, 0.0]]), 0.0)[0], [0.9375, 0.0], atol=1e-15)


def test_field_is_short(rigid_cal, rng):
    pts = geo.sample_interior(rigid_cal.scene.domain, 5000, rng)
    for t in (0.0, 0.5, 1.0):
        assert np.max(np.linalg.norm(rigid_cal(pts, t), axis=1)) <= 1.0 + 1e-12


def test_jets_match_differences(shear_scene, shear_loc, rng):
    cal = GlobalCalibration(shear_scene, shear_loc)
    pts = geo.sample_interior(shear_scene.domain, 400, rng)
    f = geo.locate_contact_points(shear_scene, 0.2)
    w = cal.width
    # skip points straddling a cutoff edge or a wedge ray, where the field is only C^1 / C^0
    s = np.abs(shear_scene.interfaces[0].chart(pts, 0.2, strict=False).s)
    keep = (np.abs(s - w) > 1e-3) & (np.abs(s - w / 2) > 1e-3)
    for fr in f:
        phi, r = fr.polar(pts)
        deg = np.abs(np.degrees(phi))
        keep &= (np.min(np.abs(deg[:, None] - [30.0, 60.0]), axis=1) > 0.5) | (r > cal.loc.r_hat)
        keep &= np.abs(r - cal.loc.r_hat) > 1e-3
    # central differences carry an h^2 truncation error that is large near the cutoff edges
    assert fd_jacobian_check(cal, pts[keep], 0.2, h=1e-6) < 1e-6
    val, _, dt = xi_global(cal, pts[keep], 0.2)
    h = 1e-5
    fd = (cal(pts[keep], 0.2 + h) - cal(pts[keep], 0.2 - h)) / (2 * h)
    assert np.max(np.abs(dt - fd)) < 1e-5


def test_static_fixture_suite(static_scene):
    loc = resolve_localization(static_scene)
    checks, rep, _ = verify_extension_suite(GlobalCalibration(static_scene, loc), n_samples=3000)
    by = _by_name(checks)
    assert all(c.passed for c in checks), checks
    for name in ("transport", "length", "bulk_cutoff_advection"):
        assert rep.max(name) <= 1e-12
    assert by["boundary_tangential"].value <= 1e-9
    assert by["interface_value"].value <= 1e-9


def test_rigid_rotation_suite(rigid_cal):
    checks, _, constants = verify_extension_suite(rigid_cal, n_samples=3000)
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
    assert 0.0 < constants["coercivity_C"] < np.inf


def test_shear_suite_orders(shear_scene, shear_loc):
    cal = GlobalCalibration(shear_scene, shear_loc)
    distances = np.logspace(-3, np.log10(cal.width / 4), 9)
    checks, _, _ = verify_extension_suite(cal, n_samples=3000, distances=distances)
    by = _by_name(checks)
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
    assert by["transport_order"].value >= 0.9
    assert by["length_order"].value >= 1.9
    assert by["bulk_cutoff_advection_order"].value >= 1.9


def test_arc_interface_suite():
    scene = scene_from_dict({"interface": {"kind": "arc", "beta": 0.3, "radius": 1.2},
                             "velocity": {"kind": "rigid", "omega": 1.0}, "horizon": 0.5})
    cal = GlobalCalibration(scene, resolve_localization(scene))
    checks, _, _ = verify_extension_suite(cal, n_samples=2000)
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]


def test_fixed_localization_from_scene():
    scene = scene_from_dict({"r_hat": 0.3, "delta": 0.2})
    loc = resolve_localization(scene)
    assert loc.r_hat == 0.3 and loc.delta == 0.2
    assert loc.width == pytest.approx(0.06)


def test_cutoff_beyond_chart_is_reported():
    cal = GlobalCalibration(disk_diameter(), Localization(0.2, 1.0, (0.2, 0.2)))
    with pytest.raises(CalibrationDomainMiss):
        cal(np.array([[0.05, 1.6]]), 0.0)
