"""Spatial service-demand densities, per-cell demand shares and dispersion.

A :class:`DensityField` is a probability density over a rectangle.  The
three analytic builtins carry closed-form marginals and conditional CDFs;
raster densities are piecewise constant and derive theirs from cumulative
sums.  Both kinds expose the same vectorised interface so the mapping code
never needs to know which one it holds.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import RasterGrid, RectDomain, Topology

BUILTINS = ("uniform", "x_exp_negy", "x_plus_y")


class DemandError(ValueError):
    pass


@dataclass(frozen=True)
class Density1D:
    """A one-dimensional density on ``[lo, hi]`` given by its pdf and CDF."""

    lo: float
    hi: float
    pdf: object
    cdf: object


class DensityField:
    """Normalised demand density over a rectangular domain.

    Use :meth:`builtin` or :meth:`raster` to construct one.
    """

    def __init__(self, domain: RectDomain, kind: str, values=None):
        self.domain = domain
        self.kind = kind
        self._values = None
        if kind == "raster":
            vals = np.array(values, dtype=float)
            if vals.ndim != 2 or min(vals.shape) < 1:
                raise DemandError("raster density must be a 2-D table")
            if (vals < 0).any() or not np.isfinite(vals).all():
                raise DemandError("raster density must be finite and nonnegative")
            ny, nx = vals.shape
            cell = (domain.width / nx) * (domain.height / ny)
            total = vals.sum() * cell
            if total <= 0:
                raise DemandError("raster density has zero total mass")
            self._values = vals / total
            self._prepare_raster()
        elif kind in BUILTINS:
            self._check_builtin_support()
            self._norm = self._builtin_norm()
        else:
            raise DemandError(f"unknown density kind {kind!r}; expected one of {BUILTINS + ('raster',)}")

    # --- construction ----------------------------------------------------

    @classmethod
    def builtin(cls, name: str, domain: RectDomain | None = None) -> "DensityField":
        return cls(domain or RectDomain(), name)

    @classmethod
    def raster(cls, domain: RectDomain, values) -> "DensityField":
        """Piecewise-constant density; ``values[j, i]`` covers row ``j`` (from
        ``y_min`` upwards) and column ``i`` (from ``x_min``)."""
        return cls(domain, "raster", values)

    @classmethod
    def from_function(cls, domain: RectDomain, func, nx: int, ny: int) -> "DensityField":
        """Raster density sampling ``func(x, y)`` at the element centres."""
        grid = RasterGrid(domain, nx, ny)
        gx, gy = np.meshgrid(grid.xs, grid.ys)
        return cls.raster(domain, func(gx, gy))

    def _check_builtin_support(self):
        d = self.domain
        if self.kind == "x_exp_negy" and d.x_min < 0:
            raise DemandError("x_exp_negy needs x_min >= 0")
        if self.kind == "x_plus_y" and d.x_min + d.y_min < 0:
            raise DemandError("x_plus_y needs x_min + y_min >= 0")

    def _builtin_norm(self) -> float:
        d = self.domain
        a, b, c, e = d.x_min, d.x_max, d.y_min, d.y_max
        if self.kind == "uniform":
            return d.area
        if self.kind == "x_exp_negy":
            return 0.5 * (b * b - a * a) * (np.exp(-c) - np.exp(-e))
        return 0.5 * (b * b - a * a) * (e - c) + 0.5 * (e * e - c * c) * (b - a)

    def _prepare_raster(self):
        v = self._values
        ny, nx = v.shape
        d = self.domain
        self._dx = d.width / nx
        self._dy = d.height / ny
        self._xedges = d.x_min + np.arange(nx + 1) * self._dx
        self._yedges = d.y_min + np.arange(ny + 1) * self._dy
        col_mass = v.sum(axis=0) * self._dx * self._dy
        row_mass = v.sum(axis=1) * self._dx * self._dy
        self._col_mass = col_mass
        self._row_mass = row_mass
        self._xcdf = np.concatenate([[0.0], np.cumsum(col_mass)])
        self._ycdf = np.concatenate([[0.0], np.cumsum(row_mass)])
        self._xcdf /= self._xcdf[-1]
        self._ycdf /= self._ycdf[-1]
        # conditional CDFs per column (in y) and per row (in x), at cell edges
        with np.errstate(invalid="ignore", divide="ignore"):
            cy = np.vstack([np.zeros(nx), np.cumsum(v, axis=0)])
            self._cond_y = (cy / cy[-1]).T            # (nx, ny + 1)
            cx = np.hstack([np.zeros((ny, 1)), np.cumsum(v, axis=1)])
            self._cond_x = cx / cx[:, -1:]            # (ny, nx + 1)

    # --- point evaluation ------------------------------------------------

    def pdf(self, x, y):
        """Normalised density value(s) at ``(x, y)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "raster":
            ny, nx = self._values.shape
            i = np.clip(((x - self.domain.x_min) / self._dx).astype(int), 0, nx - 1)
            j = np.clip(((y - self.domain.y_min) / self._dy).astype(int), 0, ny - 1)
            return self._values[j, i]
        if self.kind == "uniform":
            return np.full(np.broadcast(x, y).shape, 1.0 / self._norm)
        if self.kind == "x_exp_negy":
            return x * np.exp(-y) / self._norm
        return (x + y) / self._norm

    def masses(self, grid: RasterGrid) -> np.ndarray:
        """Per-element demand masses on ``grid`` (row-major, summing to one)."""
        pts = grid.centers()
        m = self.pdf(pts[:, 0], pts[:, 1]) * grid.cell_area
        total = m.sum()
        if total <= 0:
            raise DemandError("density has no mass on this grid")
        return m / total

    # --- one-dimensional marginals and conditionals ----------------------

    def _bounds(self, axis: str):
        d = self.domain
        return (d.x_min, d.x_max) if axis == "x" else (d.y_min, d.y_max)

    def marginal_pdf(self, axis: str, t):
        """Density of coordinate ``axis`` with the other one integrated out."""
        t = np.asarray(t, dtype=float)
        lo, hi = self._bounds(axis)
        olo, ohi = self._bounds("y" if axis == "x" else "x")
        if self.kind == "raster":
            edges, mass, width = ((self._xedges, self._col_mass, self._dx) if axis == "x"
                                  else (self._yedges, self._row_mass, self._dy))
            k = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(mass) - 1)
            return mass[k] / width
        if self.kind == "uniform":
            return np.full(t.shape, 1.0 / (hi - lo))
        if self.kind == "x_exp_negy":
            if axis == "x":
                return t * (np.exp(-olo) - np.exp(-ohi)) / self._norm
            return np.exp(-t) * 0.5 * (ohi ** 2 - olo ** 2) / self._norm
        return (t * (ohi - olo) + 0.5 * (ohi ** 2 - olo ** 2)) / self._norm

    def marginal_cdf(self, axis: str, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self._bounds(axis)
        olo, ohi = self._bounds("y" if axis == "x" else "x")
        tc = np.clip(t, lo, hi)
        if self.kind == "raster":
            edges, cdf = (self._xedges, self._xcdf) if axis == "x" else (self._yedges, self._ycdf)
            return np.interp(tc, edges, cdf)
        if self.kind == "uniform":
            return (tc - lo) / (hi - lo)
        if self.kind == "x_exp_negy":
            if axis == "x":
                return (tc * tc - lo * lo) / (hi * hi - lo * lo)
            return (np.exp(-lo) - np.exp(-tc)) / (np.exp(-lo) - np.exp(-hi))
        num = 0.5 * (tc * tc - lo * lo) * (ohi - olo) + (tc - lo) * 0.5 * (ohi ** 2 - olo ** 2)
        return num / self._norm

    def conditional_pdf(self, axis: str, t, given):
        """Density of ``axis`` given the other coordinate equals ``given``.

        This is the joint density divided by the marginal of the other
        coordinate, normalised over the ``axis`` range.
        """
        t, given = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(given, dtype=float))
        other = "y" if axis == "x" else "x"
        marg = self.marginal_pdf(other, given)
        self._require_positive(marg, other, given)
        joint = self.pdf(t, given) if axis == "x" else self.pdf(given, t)
        return joint / marg

    def conditional_cdf(self, axis: str, t, given):
        """CDF of ``axis`` conditional on the other coordinate, vectorised.

        Raster densities interpolate linearly between the conditional CDFs of
        neighbouring columns (or rows) so the result varies continuously in
        ``given``.
        """
        t, given = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(given, dtype=float))
        lo, hi = self._bounds(axis)
        olo, ohi = self._bounds("y" if axis == "x" else "x")
        other = "y" if axis == "x" else "x"
        tc = np.clip(t, lo, hi)
        self._require_positive(self.marginal_pdf(other, given), other, given)
        if self.kind == "raster":
            return self._raster_conditional_cdf(axis, tc, given)
        if self.kind == "uniform":
            return (tc - lo) / (hi - lo)
        if self.kind == "x_exp_negy":
            return self.marginal_cdf(axis, tc)
        num = given * (tc - lo) + 0.5 * (tc * tc - lo * lo)
        den = given * (hi - lo) + 0.5 * (hi * hi - lo * lo)
        return num / den

    def _require_positive(self, marg, other, given):
        bad = ~(np.asarray(marg) > 0)
        if np.any(bad):
            where = np.asarray(given)[bad] if np.ndim(given) else given
            raise DemandError(f"conditional undefined: zero marginal density at {other}={np.ravel(where)[0]!r}")

    def _raster_conditional_cdf(self, axis, t, given):
        if axis == "y":
            table, gedges, tedges, step = self._cond_y, self._xedges, self._yedges, self._dy
            gmass = self._col_mass
        else:
            table, gedges, tedges, step = self._cond_x, self._yedges, self._xedges, self._dx
            gmass = self._row_mass
        n_given = table.shape[0]
        centers = 0.5 * (gedges[:-1] + gedges[1:])
        # bracketing columns and interpolation weight
        k = np.clip(np.searchsorted(centers, given) - 1, 0, n_given - 1)
        k2 = np.minimum(k + 1, n_given - 1)
        span = centers[k2] - centers[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (given - centers[k]) / span, 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        # fall back to the populated neighbour when one side carries no mass
        frac = np.where(gmass[k] <= 0, 1.0, frac)
        frac = np.where(gmass[k2] <= 0, 0.0, frac)
        n_t = len(tedges) - 1
        r = np.clip(((t - tedges[0]) / step).astype(int), 0, n_t - 1)
        w = np.clip((t - tedges[r]) / step, 0.0, 1.0)

        def col_cdf(c):
            lo_v = table[c, r]
            hi_v = table[c, r + 1]
            return lo_v + w * (hi_v - lo_v)

        c1 = col_cdf(k)
        c2 = col_cdf(k2)
        c1 = np.where(np.isfinite(c1), c1, 0.0)
        c2 = np.where(np.isfinite(c2), c2, 0.0)
        return (1.0 - frac) * c1 + frac * c2

    def is_separable(self, tol: float = 1e-6, samples: int = 17) -> bool:
        """True when the conditional CDF of y does not depend on x."""
        d = self.domain
        ys = np.linspace(d.y_min, d.y_max, 33)
        xs = np.linspace(d.x_min, d.x_max, samples)
        xs = xs[self.marginal_pdf("x", xs) > 0]
        ref = None
        for xv in xs:
            c = self.conditional_cdf("y", ys, np.full_like(ys, xv))
            if ref is None:
                ref = c
            elif np.max(np.abs(c - ref)) > tol:
                return False
        return True


def marginalize_x(density: DensityField) -> Density1D:
    """Marginal density of x (y integrated out)."""
    d = density.domain
    return Density1D(d.x_min, d.x_max,
                     lambda t: density.marginal_pdf("x", t),
                     lambda t: density.marginal_cdf("x", t))


def marginalize_y(density: DensityField) -> Density1D:
    d = density.domain
    return Density1D(d.y_min, d.y_max,
                     lambda t: density.marginal_pdf("y", t),
                     lambda t: density.marginal_cdf("y", t))


def conditional_y(density: DensityField, x: float) -> Density1D:
    """Density of y at fixed ``x``: joint over x-marginal, normalised in y."""
    d = density.domain
    xv = float(x)
    density._require_positive(density.marginal_pdf("x", xv), "x", xv)
    return Density1D(d.y_min, d.y_max,
                     lambda t: density.conditional_pdf("y", t, xv),
                     lambda t: density.conditional_cdf("y", t, xv))


def conditional_x(density: DensityField, y: float) -> Density1D:
    d = density.domain
    yv = float(y)
    density._require_positive(density.marginal_pdf("y", yv), "y", yv)
    return Density1D(d.x_min, d.x_max,
                     lambda t: density.conditional_pdf("x", t, yv),
                     lambda t: density.conditional_cdf("x", t, yv))


# --- demand share --------------------------------------------------------

@dataclass
class DemandShare:
    volume: float
    shares: np.ndarray

    @property
    def fractions(self) -> np.ndarray:
        return self.shares / self.volume

    @property
    def gap(self) -> float:
        """Max minus min share as a fraction of the total volume."""
        f = self.fractions
        return float(f.max() - f.min())


def _masses_for(topology: Topology, density) -> np.ndarray:
    if isinstance(density, DensityField):
        return density.masses(topology.grid)
    m = np.asarray(density, dtype=float).ravel()
    if m.size != topology.grid.size:
        raise DemandError(f"mass raster has {m.size} elements, topology grid has {topology.grid.size}")
    return m


def demand_share(topology: Topology, density, volume: float) -> DemandShare:
    """Expected users per cell, ``V_l = V * sum of masses in cell l``.

    ``density`` is a :class:`DensityField` or a per-element mass array on the
    topology's grid.
    """
    masses = _masses_for(topology, density)
    per_cell = np.bincount(topology.assignment, weights=masses, minlength=topology.L)
    return DemandShare(float(volume), float(volume) * per_cell)


def cov(values) -> float:
    """Coefficient of variation: population standard deviation over mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DemandError("cov of an empty sequence")
    mean = v.mean()
    if not mean > 0:
        raise DemandError(f"cov needs a positive mean, got {mean}")
    return float(v.std() / mean)


# --- file formats ----------------------------------------------------------

def read_raster(path) -> DensityField:
    """Read ``nx ny x_min x_max y_min y_max`` then ``ny`` rows of ``nx`` values."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6:
            raise DemandError(f"{path}: header must be 'nx ny x_min x_max y_min y_max'")
        nx, ny = int(header[0]), int(header[1])
        x0, x1, y0, y1 = (float(t) for t in header[2:])
        values = np.array(fh.read().split(), dtype=float)
    if values.size != nx * ny:
        raise DemandError(f"{path}: expected {nx * ny} values, found {values.size}")
    return DensityField.raster(RectDomain(x0, x1, y0, y1), values.reshape(ny, nx))


def write_raster(path, domain: RectDomain, values) -> None:
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    with open(path, "w") as fh:
        fh.write(f"{nx} {ny} {domain.x_min!r} {domain.x_max!r} {domain.y_min!r} {domain.y_max!r}\n")
        for row in values:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def write_shares_csv(path, share: DemandShare) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_index", "V_l", "fraction"])
        for idx, (v, f) in enumerate(zip(share.shares, share.fractions), start=1):
            w.writerow([idx, repr(float(v)), repr(float(f))])
