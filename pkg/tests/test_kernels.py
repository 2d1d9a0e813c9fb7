"""The compiled and NumPy kernels must give the same answers."""
import numpy as np
import pytest

from spatialplan import kernels
from spatialplan.kernels import available_backends

BACKENDS = available_backends()


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


@pytest.fixture(scope="module")
def case():
    rng = np.random.default_rng(7)
    pts = rng.uniform([0, 0], [6, 4], (5000, 2))
    sites = rng.uniform([0, 0], [6, 4], (9, 2))
    w = rng.uniform(-0.5, 0, 9)
    mass = rng.uniform(0, 1, 5000)
    mass[::10] = 0.0
    gain = rng.uniform(0.01, 1, (9, 5000))
    return pts, sites, w, mass, gain


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
@pytest.mark.parametrize("period", [None, (6.0, 4.0)])
def test_backends_agree(case, period):
    pts, sites, w, mass, gain = case
    py, c = BACKENDS["python"], BACKENDS["compiled"]
    lab = py.assign(pts, sites, w, period)
    assert np.array_equal(lab, c.assign(pts, sites, w, period))
    for a, b in zip(py.cell_moments(lab, mass, pts, 9), c.cell_moments(lab, mass, pts, 9)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    power = np.linspace(0.2, 1, 9)
    alpha = np.linspace(0.1, 0.9, 9)
    sp, ip = py.sir_field(lab, gain, power, alpha)
    sc, ic = c.sir_field(lab, gain, power, alpha)
    assert np.allclose(sp, sc, rtol=1e-13) and np.allclose(ip, ic, rtol=1e-13)
    assert np.allclose(py.load_sums(lab, mass, sp, ip, 9, 1e6), c.load_sums(lab, mass, sc, ic, 9, 1e6),
                       rtol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_zero_interference_is_capped(name):
    mod = BACKENDS[name]
    lab = np.array([0, 0, 1])
    out = mod.load_sums(lab, np.array([0.5, 0.0, 0.5]), np.ones(3), np.zeros(3), 2, 1e6)
    assert np.allclose(out, [0.5 / np.log1p(1e6), 0.5 / np.log1p(1e6)])
