"""NumPy implementations of the raster kernels.

These mirror the compiled routines in ``_ckernels.pyx`` one for one and are
used whenever the extension is not built (or ``SPATIALPLAN_PURE=1``).
"""
import numpy as np

# rows of the element-by-site score matrix evaluated at once
_CHUNK = 16384


def assign(points, sites, weights, period=None):
    """Label every point with the site minimising ``distance - weight``.

    ``period`` is ``(X, Y)`` for wrap-around distances, ``None`` for the
    plane.  Ties go to the lowest site index (``argmin`` semantics).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    sites = np.ascontiguousarray(sites, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    labels = np.empty(len(points), dtype=np.intp)
    for start in range(0, len(points), _CHUNK):
        block = points[start:start + _CHUNK]
        dx = np.abs(block[:, 0, None] - sites[None, :, 0])
        dy = np.abs(block[:, 1, None] - sites[None, :, 1])
        if period is not None:
            dx = np.minimum(dx, period[0] - dx)
            dy = np.minimum(dy, period[1] - dy)
        score = np.sqrt(dx * dx + dy * dy) - weights[None, :]
        labels[start:start + _CHUNK] = np.argmin(score, axis=1)
    return labels


def cell_moments(labels, mass, points, n_cells):
    """Per-cell demand mass and first moments ``(m, sum m*x, sum m*y)``."""
    m = np.bincount(labels, weights=mass, minlength=n_cells)
    mx = np.bincount(labels, weights=mass * points[:, 0], minlength=n_cells)
    my = np.bincount(labels, weights=mass * points[:, 1], minlength=n_cells)
    return m, mx, my


def sir_field(labels, gain, power, alpha):
    """Serving signal and load-weighted interference for every element."""
    n_cells, n_elem = gain.shape
    idx = np.arange(n_elem)
    own_gain = gain[labels, idx]
    signal = power[labels] * own_gain
    weighted = power * alpha
    interference = np.zeros(n_elem)
    # ascending-cell accumulation keeps the sum order of the compiled kernel
    for cell in range(n_cells):
        q = weighted[cell]
        if q == 0.0:
            continue
        contrib = q * gain[cell]
        contrib[labels == cell] = 0.0
        interference += contrib
    return signal, interference


def load_sums(labels, mass, signal, interference, n_cells, sir_cap):
    """Per-cell sums of ``mass / ln(1 + min(sir, sir_cap))``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        sir = np.where(interference > 0.0, signal / interference, np.inf)
    sir = np.minimum(sir, sir_cap)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(mass > 0.0, mass / np.log1p(sir), 0.0)
    return np.bincount(labels, weights=term, minlength=n_cells)
