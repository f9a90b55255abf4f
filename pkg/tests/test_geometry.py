import numpy as np
import pytest

from artifact import geometry as geo
from artifact.scene import disk_diameter, scene_from_dict

S3 = np.sqrt(3.0) / 2.0


def _rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def test_disk_boundary_chart_matches_closed_form():
    ch = geo.DiskBoundary(1.0).chart(np.array([[0.5, 0.0]]))
    assert ch.s[0] == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_allclose(ch.P[0], [1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(ch.n[0], [-1.0, 0.0], atol=1e-14)
    assert ch.H[0] == pytest.approx(1.0, abs=1e-14)


def test_point_on_disk_boundary_has_zero_distance():
    assert abs(geo.DiskBoundary(1.0).chart(np.array([[1.0, 0.0]])).s[0]) < 1e-15


def test_boundary_tangent_uses_contact_orientation(rigid_scene):
    tau = rigid_scene.boundary_chart(np.array([[0.316, 0.949]])).tau[0]
    np.testing.assert_allclose(tau, [0.949, -0.316], atol=2e-3)


def test_disk_distance_agrees_with_brute_force(rng):
    disk = geo.DiskBoundary(1.0)
    pts = geo.sample_interior(disk, 200, rng)
    pts = pts[np.linalg.norm(pts, axis=1) > 0.2]
    m = 200_000
    dense = disk.curve.point(np.arange(m) / m)
    brute = np.min(np.linalg.norm(pts[:, None] - dense[None], axis=2), axis=1)
    # a sample spacing h overestimates a distance s by at most (h/2)^2 / (2 s)
    slack = (np.pi / m) ** 2 / (2.0 * brute) + 1e-13
    gap = brute - disk.signed_distance(pts)
    assert np.all(gap >= -1e-13)
    assert np.all(gap <= slack)


def test_ellipse_chart_projection_is_orthogonal(rng):
    ell = geo.EllipseBoundary(2.0, 1.0)
    pts = rng.uniform(-0.4, 0.4, (50, 2)) * [2.0, 1.0]
    ch = ell.chart(pts, strict=False)
    tangent = ell.curve.d1(ch.u)
    residual = np.sum((pts - ch.P) * tangent, axis=1) / np.linalg.norm(tangent, axis=1)
    assert np.max(np.abs(residual)) < 1e-12
    np.testing.assert_allclose(pts, ch.P + ch.s[:, None] * ch.n, atol=1e-12)


def test_band_violation_raises():
    with pytest.raises(geo.OutsideTubularBand):
        geo.EllipseBoundary(2.0, 1.0).chart(np.array([[0.0, 0.0]]))


def test_straight_interface_chart(rigid_scene):
    ch = rigid_scene.interface_chart(np.array([[0.1, 0.0]]))
    assert ch.s[0] == pytest.approx(0.1, abs=1e-15)
    np.testing.assert_allclose(ch.P[0], [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(ch.n[0], [1.0, 0.0], atol=1e-15)
    assert ch.H[0] == 0.0


def test_point_on_interface_projects_to_itself(rigid_scene):
    iface = rigid_scene.interfaces[0]
    p = iface.point(np.array([0.2, 0.5, 0.7]), 0.3)
    ch = iface.chart(p, 0.3)
    assert np.max(np.abs(ch.s)) < 1e-14
    np.testing.assert_allclose(ch.P, p, atol=1e-14)


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
def test_arc_interface_curvature_is_inverse_radius(radius):
    iface = geo.EvolvingInterface(geo.orthogonal_arc(0.0, radius), None, radius=radius)
    u = np.linspace(0.1, 0.9, 7)
    on = iface.point(u, 0.0)
    ch = iface.chart(on, 0.0)
    np.testing.assert_allclose(ch.H, 1.0 / radius, rtol=1e-12)
    # second difference of the signed distance along the normal
    h = 1e-4
    s = lambda q: iface.chart(q, 0.0).s
    lap = sum((s(on + h * e) - 2 * s(on) + s(on - h * e)) / h ** 2 for e in np.eye(2))
    np.testing.assert_allclose(-lap, 1.0 / radius, rtol=1e-5)


def test_signed_distance_gradient_is_normal(shear_scene, rng):
    iface = shear_scene.interfaces[0]
    pts = rng.uniform(-0.3, 0.3, (40, 2))
    t, h = 0.3, 1e-6
    ch = iface.chart(pts, t)
    grad = np.stack([(iface.chart(pts + h * e, t).s - iface.chart(pts - h * e, t).s) / (2 * h)
                     for e in np.eye(2)], 1)
    assert np.max(np.abs(grad - ch.n)) < 1e-6


def test_chart_jets_time_derivative_matches_difference(shear_scene, rng):
    iface = shear_scene.interfaces[0]
    pts = rng.uniform(-0.3, 0.3, (20, 2))
    t, h = 0.25, 1e-6
    jet = iface.jets(pts, t).s
    fd = (iface.chart(pts, t + h).s - iface.chart(pts, t - h).s) / (2 * h)
    assert np.max(np.abs(jet.dt - fd)) < 1e-7


def test_contact_frames_of_disk_diameter(rigid_scene):
    frames = geo.locate_contact_points(rigid_scene, 0.0)
    assert len(frames) == 2
    top = next(f for f in frames if f.c[1] > 0)
    np.testing.assert_allclose(top.c, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(top.n_bd, [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(top.n_if, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(top.tau_if, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(top.X("T+"), [0.5, -S3], atol=1e-15)
    for f in frames:
        assert f.angle_residual < 1e-14
        assert f.comp_zero_residual < 1e-14
        assert f.comp_higher_residual < 1e-8
        assert np.linalg.norm(f.tau_if - f.n_bd) < 1e-14 or np.linalg.norm(f.tau_if + f.n_bd) < 1e-14
        assert f.X("Omega+") @ f.n_bd == pytest.approx(0.5, abs=1e-15)


def test_contact_compatibility_residuals_under_shear(shear_scene):
    for t in np.linspace(0.0, 0.5, 6):
        for f in geo.locate_contact_points(shear_scene, float(t)):
            assert f.comp_zero_residual < 1e-8
            assert f.comp_higher_residual < 1e-6


def test_contact_frames_rotate_with_the_diameter(rigid_scene):
    phi = 0.7
    tilted = disk_diameter(angle=phi)
    rot = _rot(phi)
    base = sorted(geo.locate_contact_points(rigid_scene, 0.0), key=lambda f: f.end)
    turned = sorted(geo.locate_contact_points(tilted, 0.0), key=lambda f: f.end)
    for a, b in zip(base, turned):
        for name in ("c", "n_bd", "n_if", "tau_if", "tau_bd"):
            np.testing.assert_allclose(rot @ getattr(a, name), getattr(b, name), atol=1e-14)
        np.testing.assert_allclose(rot @ a.X("T+"), b.X("T+"), atol=1e-14)


def test_wedge_classification_examples(rigid_scene):
    top = next(f for f in geo.locate_contact_points(rigid_scene, 0.0) if f.c[1] > 0)
    assert geo.classify_wedge(np.array([[0.1, 0.9]]), top, 0.5)[0] == "W_Omega+"
    near_ray = top.c + 0.05 * top.X("T+") + 1e-3 * top.X("T-")
    assert geo.classify_wedge(near_ray, top, 0.5)[0] == "W_T"
    assert geo.classify_wedge(np.array([[0.0, 0.0]]), top, 0.5)[0] == "outside-ball"


def test_wedges_cover_the_half_ball():
    phi = np.linspace(-np.pi / 2, np.pi / 2, 2001)
    r = np.full_like(phi, 0.2)
    labels = geo.classify_angles(phi, r, 0.5)
    assert set(labels) == {"W_T", "W_Omega+", "W_Omega-", "W_bd+", "W_bd-"}
    # opening angles: 60 deg for the interface wedge, 30 deg for each interpolation wedge
    step = phi[1] - phi[0]
    for name, opening in (("W_T", 60), ("W_Omega+", 30), ("W_Omega-", 30), ("W_bd+", 30), ("W_bd-", 30)):
        assert np.degrees(np.count_nonzero(labels == name) * step) == pytest.approx(opening, abs=0.2)


def test_localization_radius_of_diameter(rigid_scene):
    radii = geo.estimate_localization_radii(rigid_scene, times=[0.0, 0.5])
    assert 0.0 < radii.interface[0] <= 1.0
    assert 0.0 < radii.r_hat <= min(radii.interface + radii.contact_hat)
    assert 0.0 < radii.delta <= 0.25


@pytest.mark.parametrize("radius", [0.6, 1.5])
def test_localization_radius_of_arc_is_at_most_its_radius(radius):
    sc = scene_from_dict({"interface": {"kind": "arc", "beta": 0.0, "radius": radius},
                          "velocity": {"kind": "zero"}})
    radii = geo.estimate_localization_radii(sc, times=[0.0])
    assert radii.interface[0] <= radius * (1 + 1e-12)


def test_localization_radius_of_two_close_arcs():
    sc = scene_from_dict({"interfaces": [{"kind": "arc", "beta": 0.0, "radius": 1.0},
                                         {"kind": "arc", "beta": 0.0, "radius": 1.3}],
                          "velocity": {"kind": "zero"}})
    a = sc.interfaces[0].sample(4000, 0.0)[1]
    b = sc.interfaces[1].sample(4000, 0.0)[1]
    gap = float(np.min(np.linalg.norm(a[:, None] - b[None], axis=2)))
    radii = geo.estimate_localization_radii(sc, times=[0.0])
    assert max(radii.interface) <= 0.5 * gap * (1 + 1e-3)
    assert radii.r_hat <= 0.5 * gap * (1 + 1e-3)


def test_non_orthogonal_contact_is_rejected():
    with pytest.raises(geo.AngleViolation):
        scene_from_dict({"interface": {"kind": "diameter", "end_tilt_deg": 30.0}})
