import numpy as np
import pytest

from artifact import geometry as geo
from artifact.calibration_bulk import (BulkExtension, FixtureInconsistent, check_fixture,
                                       length_residual, transport_residual,
                                       verify_bulk_properties, xi_bulk)
from artifact.fd import fd_divergence, fd_jacobian
from artifact.flows import AzimuthalFlow
from artifact.scene import SceneSpec, scene_from_dict


def _arc_scene(radius, velocity):
    return scene_from_dict({"interface": {"kind": "arc", "beta": 0.0, "radius": radius},
                            "velocity": velocity, "horizon": 0.5})


def test_straight_interface_has_constant_normal(rigid_scene):
    val, jac, dt = xi_bulk(rigid_scene, np.array([[0.3, 0.2]]), 0.0)
    np.testing.assert_allclose(val[0], [1.0, 0.0], atol=1e-15)
    assert np.max(np.abs(jac)) == 0.0


def test_value_on_interface_is_the_normal(shear_scene):
    iface = shear_scene.interfaces[0]
    u = np.linspace(0.05, 0.95, 19)
    for t in (0.0, 0.2, 0.5):
        on = iface.point(u, t)
        g1 = iface.d1(u, t)
        nrm = geo.rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None])
        assert np.max(np.abs(BulkExtension(shear_scene)(on, t) - nrm)) < 1e-13


@pytest.mark.parametrize("radius", [0.8, 1.5])
def test_arc_extension_is_radial_with_curvature_divergence(radius):
    sc = _arc_scene(radius, {"kind": "zero"})
    iface = sc.interfaces[0]
    center = np.asarray(iface.initial.center)
    u = np.linspace(0.2, 0.8, 9)
    on, g1 = iface.point(u, 0.0), iface.d1(u, 0.0)
    nrm = geo.rot_cw(g1 / np.linalg.norm(g1, axis=1)[:, None])
    for s in (1e-3, 1e-2, 5e-2):
        pts = on + s * nrm
        xi = BulkExtension(sc)(pts, 0.0)
        radial = (pts - center) / np.linalg.norm(pts - center, axis=1)[:, None]
        assert np.max(np.abs(np.abs(np.sum(xi * radial, axis=1)) - 1.0)) < 1e-12
        div = fd_divergence(lambda q: BulkExtension(sc)(q, 0.0), pts, 1e-5)
        # divergence of the radial field on the parallel curve at distance s
        H = iface.chart(pts, 0.0).H
        assert np.max(np.abs(div + H)) <= 2.0 * s / radius ** 2 + 1e-6


def test_jet_jacobian_matches_differences(shear_scene, rng):
    pts = rng.uniform(-0.3, 0.3, (30, 2))
    ext = BulkExtension(shear_scene)
    jac = ext.jets(pts, 0.2).jacobian
    fd = fd_jacobian(lambda q: ext(q, 0.2), pts, 1e-6)
    assert np.max(np.abs(jac - fd)) < 1e-7


def test_rigid_rotation_length_residual_vanishes(rigid_scene, rng):
    pts = rng.uniform(-0.4, 0.4, (500, 2))
    for t in (0.0, 0.4, 1.0):
        xi = BulkExtension(rigid_scene).jets(pts, t)
        v = rigid_scene.velocity.velocity(pts, t)
        assert np.max(np.abs(length_residual(xi, v))) <= 1e-10
        g = rigid_scene.velocity.grad(pts, t)
        assert np.max(np.abs(transport_residual(xi, v, g))) <= 1e-10


def test_static_fixture_residuals_vanish(static_scene):
    rep = verify_bulk_properties(static_scene)
    for name in ("div", "transport", "length", "unit"):
        assert rep.max(name) <= 1e-12


def test_shear_transport_residual_is_first_order(shear_scene):
    rep = verify_bulk_properties(shear_scene)
    assert rep.fit("transport").slope >= 0.9
    assert rep.max("unit") <= 1e-12
    # the flow bends the diameter, so the divergence residual is first order too
    assert rep.fit("div").slope >= 0.9


@pytest.mark.parametrize("velocity", [{"kind": "zero"}, {"kind": "rigid", "omega": 1.0}])
def test_arc_divergence_residual_is_first_order(velocity):
    rep = verify_bulk_properties(_arc_scene(1.0, velocity))
    assert rep.fit("div").slope >= 0.9
    assert rep.fit("transport").passes(0.9)


def test_inconsistent_fixture_is_rejected(rigid_scene):
    bad = SceneSpec(domain=rigid_scene.domain, interfaces=rigid_scene.interfaces,
                    velocity=AzimuthalFlow(1.0, 0.5), horizon=1.0)
    with pytest.raises(FixtureInconsistent):
        check_fixture(bad, [0.5])
    check_fixture(rigid_scene, [0.0, 0.5, 1.0])


def test_projection_beyond_the_curve_end_raises(rigid_scene):
    with pytest.raises(geo.OutsideTubularBand):
        BulkExtension(rigid_scene)(np.array([[0.1, 1.5]]), 0.0)
