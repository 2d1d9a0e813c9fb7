import math

import numpy as np
import pytest

import oracles
from spatialplan import RadioParams, RasterGrid, RectDomain, assign_power_voronoi, cell_loads, solve_nlce, voronoi
from spatialplan.geometry import rect_lattice
from spatialplan.loadmodel import (LoadError, NLCEDivergence, dimension, distances, gain_matrix, sir, sir_map,
                                   torus_topology, uniform_torus_load)

DOMAIN = RectDomain()
RADIO = RadioParams()
TOY_SITES = np.array([[1.5, 2.0], [4.5, 2.0]])


@pytest.fixture(scope="module")
def toy():
    g = RasterGrid(DOMAIN, 30, 20)
    topo = assign_power_voronoi(TOY_SITES, np.zeros(2), g)
    return topo, np.full(g.size, 1.0 / g.size)


def test_radio_validation_and_prefactor():
    assert RADIO.prefactor == pytest.approx(692.3 * 1e6 * math.log(2) / 20e6)
    for bad in (dict(volume=0), dict(bandwidth=-1), dict(exponent=1.5), dict(d_min=0.0)):
        with pytest.raises(ValueError):
            RadioParams(**bad)


def test_sir_hand_examples():
    # sites (1,1), (5,1); element (2,1): distances 1 and 3, beta = 3
    assert np.allclose(distances([[1, 1], [5, 1]], [[2, 1]]), [[1.0], [3.0]])
    g = np.array([[1.0], [3.0 ** -3]])
    assert sir(0, 0, [1, 1], [1, 1], g) == pytest.approx(27.0)
    assert sir(0, 0, [1, 0], [1, 1], g) == math.inf
    # symmetric midpoint with equal loads and powers
    assert sir(0, 0, [1, 1], [1, 1], np.array([[0.2], [0.2]])) == pytest.approx(1.0)


def test_gain_is_clamped_and_wraps_on_torus():
    g = RasterGrid(DOMAIN, 6, 4)
    topo = assign_power_voronoi([[0.5, 0.5]], [0.0], g)
    gm = gain_matrix(topo, RADIO)
    assert gm.d_min == pytest.approx(g.half_diagonal())
    assert gm.values[0, 0] == pytest.approx(gm.d_min ** -3)
    assert np.all(np.isfinite(gm.values)) and np.all(gm.values > 0)
    d = distances([[0.5, 0.5]], [[5.5, 3.5]], DOMAIN, "torus")
    assert d[0, 0] == pytest.approx(math.sqrt(2))


def test_interference_free_single_cell():
    g = RasterGrid(DOMAIN, 30, 20)
    topo = voronoi([[3.0, 2.0]], g)
    alpha = cell_loads(topo, np.full(g.size, 1 / g.size), [0.0], [1.0], RADIO, gain_matrix(topo, RADIO))
    assert alpha[0] == pytest.approx(692.3 * 1e6 / 20e6 / math.log2(1 + 1e6), rel=1e-12)


def test_one_application_matches_scalar_oracle(toy):
    topo, m = toy
    p = np.array([1.0, 0.6])
    gain = gain_matrix(topo, RADIO)
    _, _, it = oracles.two_cell_loads(TOY_SITES, p, RADIO.prefactor, steps=2)
    first = cell_loads(topo, m, np.zeros(2), p, RADIO, gain)
    assert np.allclose(first, it[1], rtol=1e-12)
    second = cell_loads(topo, m, first, p, RADIO, gain)
    assert np.allclose(second, it[2], rtol=1e-12)


def test_power_scale_and_parameter_scaling(toy):
    topo, m = toy
    gain = gain_matrix(topo, RADIO)
    a, p = np.array([0.3, 0.5]), np.array([1.0, 0.4])
    base = cell_loads(topo, m, a, p, RADIO, gain)
    for c in (0.5, 3.0, 100.0):
        assert np.allclose(cell_loads(topo, m, a, c * p, RADIO, gain), base, rtol=1e-14)
    assert np.allclose(cell_loads(topo, m, a, p, RadioParams(volume=2 * 692.3), gain), 2 * base, rtol=1e-14)
    assert np.allclose(cell_loads(topo, m, a, p, RadioParams(rate_min=3e6), gain), 3 * base, rtol=1e-14)
    assert np.allclose(cell_loads(topo, m, a, p, RadioParams(bandwidth=40e6), gain), base / 2, rtol=1e-14)


def test_load_map_monotone_in_alpha():
    g = RasterGrid(DOMAIN, 60, 40)
    rng = np.random.default_rng(3)
    topo = voronoi(rng.uniform([0, 0], [6, 4], (7, 2)), g)
    gain = gain_matrix(topo, RADIO)
    m = np.full(g.size, 1 / g.size)
    p = rng.uniform(0.2, 1, 7)
    for _ in range(20):
        lo = rng.uniform(0, 1, 7)
        hi = lo + rng.uniform(0, 1, 7)
        assert np.all(cell_loads(topo, m, lo, p, RADIO, gain) <= cell_loads(topo, m, hi, p, RADIO, gain))


def test_zero_power_cell_gives_load_error(toy):
    topo, m = toy
    with pytest.raises(LoadError) as info:
        cell_loads(topo, m, np.zeros(2), [0.0, 1.0], RADIO, gain_matrix(topo, RADIO))
    assert info.value.element is not None
    with pytest.raises(ValueError):
        solve_nlce(topo, m, [0.0, 1.0], RADIO)


def test_symmetric_toy_and_fixed_point_residual(toy):
    topo, m = toy
    light = RadioParams(volume=80.0)
    gain = gain_matrix(topo, light)
    res = solve_nlce(topo, m, [1.0, 1.0], light, gain, tol=1e-12)
    assert res.alpha[0] == pytest.approx(res.alpha[1], rel=1e-12)
    assert np.max(np.abs(cell_loads(topo, m, res.alpha, [1, 1], light, gain) - res.alpha)) < 1e-11
    assert len(res.outage_cells) == 0


def test_divergence_reports_outage(toy):
    topo, m = toy
    with pytest.raises(NLCEDivergence) as info:
        solve_nlce(topo, m, [1.0, 1.0], RADIO)
    exc = info.value
    assert len(exc.outage_cells) == 2 and exc.last.max() > exc.previous.max()


def test_torus_lattice_is_flat_and_scalar_shortcut_agrees():
    topo = torus_topology(DOMAIN, 6, 5, cell_resolution=20)
    m = np.full(topo.grid.size, 1 / topo.grid.size)
    alpha = solve_nlce(topo, m, np.ones(30), RADIO, tol=1e-13, max_iter=5000).alpha
    assert alpha.max() - alpha.min() < 1e-9
    assert uniform_torus_load(RADIO, topo) == pytest.approx(alpha.mean(), abs=1e-9)


def test_dimension_examples():
    res = dimension(RADIO, DOMAIN, target_load=0.9)
    assert res.load <= 0.9 and 25 <= res.L <= 40
    assert res.L == res.cols * res.rows
    assert all(not load <= 0.9 for _, _, _, load in res.table[:-1])
    assert dimension(RadioParams(volume=2 * 692.3), DOMAIN, 0.9).L > res.L
    assert dimension(RadioParams(volume=1e-3), DOMAIN, target_load=1.0).L == 1
    with pytest.raises(ValueError):
        dimension(RADIO, DOMAIN, target_load=0.01, max_cells=5)


def test_sir_map_shape(toy):
    topo, m = toy
    s = sir_map(topo, [0.5, 0.5], [1, 1], gain_matrix(topo, RADIO))
    assert s.shape == (topo.grid.size,) and np.all(s > 0)
