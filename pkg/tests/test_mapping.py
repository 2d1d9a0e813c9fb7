import math

import numpy as np
import pytest

import oracles
from spatialplan import DensityField, MappingSpec, RectDomain, invert_1d, map_topology
from spatialplan.geometry import rect_lattice
from spatialplan.mapping import MappingError, map_point_marginal, map_point_separable

DOMAIN = RectDomain()
D1 = DensityField.builtin("x_exp_negy", DOMAIN)
D2 = DensityField.builtin("x_plus_y", DOMAIN)


def test_invert_1d_examples():
    assert invert_1d(lambda s: s, 0.3, 0.0, 1.0) == pytest.approx(0.3, abs=1e-12)
    assert invert_1d(lambda s: s * s / 36.0, 1.5 / 6, 0.0, 6.0) == pytest.approx(3.0, abs=1e-12)
    y = invert_1d(lambda s: (1 - np.exp(-s)) / (1 - math.exp(-4)), 0.5, 0.0, 4.0)
    assert y == pytest.approx(-math.log(1 - 0.5 * (1 - math.exp(-4))), abs=1e-12)
    assert y == pytest.approx(0.675, abs=5e-4)
    assert isinstance(invert_1d(lambda s: s, 0.3, 0.0, 1.0), float)
    assert np.array_equal(invert_1d(lambda s: s, np.array([0.0, 1.0]), 0.0, 1.0), [0.0, 1.0])


def test_invert_1d_rejects_bad_cdfs():
    with pytest.raises(MappingError):
        invert_1d(lambda s: np.sin(3 * s), 0.5, 0.0, 1.0)
    with pytest.raises(MappingError):
        invert_1d(lambda s: 0.5 * s, 0.2, 0.0, 1.0)


def test_separable_corners_and_paper_point():
    spec = MappingSpec(DOMAIN, D1, "separable")
    assert map_point_separable(spec, (0, 0)) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert map_point_separable(spec, (6, 4)) == pytest.approx((6.0, 4.0), abs=1e-12)
    x, y = map_point_separable(spec, (1.5, 2.0))
    assert x == pytest.approx(3.0, abs=1e-9)
    assert y == pytest.approx(0.675, abs=5e-4)


def test_marginal_corners_and_paper_point():
    spec = MappingSpec(DOMAIN, D2, "marginal_x_first")
    assert map_point_marginal(spec, (6, 4)) == pytest.approx((6.0, 4.0), abs=1e-9)
    assert map_point_marginal(spec, (0, 0)) == pytest.approx((0.0, 0.0), abs=1e-9)
    x, _ = map_point_marginal(spec, (1.5, 1.0))
    assert x == pytest.approx(0.5 * (-4 + math.sqrt(76)), abs=1e-6)
    assert x == pytest.approx(2.3589, abs=1e-4)
    with pytest.raises(MappingError):
        map_point_marginal(MappingSpec(DOMAIN, D1, "separable"), (1, 1))


def test_separable_mode_needs_separable_density():
    with pytest.raises(MappingError):
        MappingSpec(DOMAIN, D2, "separable")
    with pytest.raises(MappingError):
        MappingSpec(DOMAIN, D2, "diagonal")


def test_points_outside_source_rejected():
    with pytest.raises(MappingError):
        MappingSpec(DOMAIN, D2).map_points([[7.0, 1.0]])


def test_centre_site_against_closed_form():
    out = map_topology(MappingSpec(DOMAIN, D2), [[3.0, 2.0]])[0]
    u, v = oracles.g2m(3.0, 2.0)
    assert out[0] >= 3.0
    assert out == pytest.approx([u, v], abs=1e-9)


def test_uniform_density_is_identity():
    lat = rect_lattice(DOMAIN, 6, 5)
    out = map_topology(MappingSpec(DOMAIN, DensityField.builtin("uniform", DOMAIN)), lat)
    assert np.array_equal(out, lat)


def test_lattice_compresses_towards_high_demand():
    lat = rect_lattice(DOMAIN, 6, 5)
    out = map_topology(MappingSpec(DOMAIN, D1, "separable"), lat)
    # high demand at large x and small y: mapped sites shift right and down
    assert np.all(out[:, 0] >= lat[:, 0]) and np.all(out[:, 1] <= lat[:, 1])
    assert np.mean(out[:, 0]) > 3.0 and np.mean(out[:, 1]) < 2.0


def test_monotone_along_each_axis():
    spec = MappingSpec(DOMAIN, D2)
    s = np.linspace(0, 6, 101)
    for y0 in (0.5, 2.0, 3.9):
        out = spec.map_points(np.column_stack([s, np.full_like(s, y0)]))
        assert np.all(np.diff(out[:, 0]) > 0)
    t = np.linspace(0, 4, 101)
    for x0 in (0.5, 3.0, 5.5):
        out = spec.map_points(np.column_stack([np.full_like(t, x0), t]))
        assert np.all(np.diff(out[:, 1]) > 0)


def test_order_dependence_with_both_orders_preserving_volume():
    xf = MappingSpec(DOMAIN, D2, "marginal_x_first")
    yf = MappingSpec(DOMAIN, D2, "marginal_y_first")
    pts = np.array([[1.5, 2.0], [3.0, 1.0], [4.5, 3.0]])
    assert np.max(np.abs(xf.map_points(pts) - yf.map_points(pts))) > 1e-2
    m_x = oracles.image_bin_masses(xf.map_points, oracles.ycum2)
    m_y = oracles.image_bin_masses(oracles.transposed(yf.map_points), oracles.xcum2, nx=200, width=4.0, height=6.0)
    assert np.max(np.abs(m_x * 64 - 1)) < 0.02 and np.max(np.abs(m_y * 64 - 1)) < 0.02


def test_raster_density_mapping_close_to_builtin():
    from spatialplan import RasterGrid
    g = RasterGrid(DOMAIN, 300, 200)
    c = g.centers()
    r = DensityField.raster(DOMAIN, (c[:, 0] + c[:, 1]).reshape(200, 300))
    lat = rect_lattice(DOMAIN, 6, 5)
    a = MappingSpec(DOMAIN, r).map_points(lat)
    b = MappingSpec(DOMAIN, D2).map_points(lat)
    assert np.max(np.abs(a - b)) < 5e-3
