"""Inverse-CDF spatial mappings between rectangles.

The mapping sends a uniform layout in a source rectangle to a layout in the
target rectangle whose local density follows a demand density.  Each
coordinate is solved by one-dimensional CDF inversion: independently per
axis for separable densities, or marginal-then-conditional otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import DensityField
from .geometry import RectDomain

MODES = ("separable", "marginal_x_first", "marginal_y_first")


class MappingError(ValueError):
    pass


def invert_1d(cdf, t, lo: float, hi: float, max_iter: int = 60, check: bool = True):
    """Solve ``cdf(x) = t`` for ``x`` in ``[lo, hi]`` by bisection.

    ``cdf`` must be vectorised and nondecreasing with ``cdf(lo) = 0`` and
    ``cdf(hi) = 1``.  ``t`` may be a scalar or an array; the result has the
    same shape.  With ``check`` the CDF is sampled first and a decrease of
    more than 1e-12 raises :class:`MappingError`.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((t < -1e-12) | (t > 1 + 1e-12)):
        raise MappingError("target probabilities must lie in [0, 1]")
    if check:
        sample = np.asarray(cdf(np.linspace(lo, hi, 257)), dtype=float)
        if np.any(np.diff(sample) < -1e-12):
            raise MappingError("CDF is not monotone")
        if abs(sample[0]) > 1e-9 or abs(sample[-1] - 1.0) > 1e-9:
            raise MappingError(f"CDF does not span [0, 1] (ends at {sample[0]:.3g}, {sample[-1]:.3g})")
    a = np.full(t.shape, float(lo))
    b = np.full(t.shape, float(hi))
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        below = np.asarray(cdf(mid), dtype=float) < t
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(b - a <= 2 * np.spacing(np.maximum(np.abs(a), np.abs(b)))):
            break
    x = 0.5 * (a + b)
    x = np.where(t <= 0.0, lo, np.where(t >= 1.0, hi, x))
    return float(x[0]) if scalar else x


@dataclass(frozen=True)
class MappingSpec:
    """Point transformation from ``source`` to the density's rectangle."""

    source: RectDomain
    density: DensityField
    mode: str = "marginal_x_first"

    def __post_init__(self):
        if self.mode not in MODES:
            raise MappingError(f"unknown mapping mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "separable" and not self.density.is_separable(tol=1e-6):
            raise MappingError("density is not separable; use a marginal mode")
        self._check_conditionals()

    @property
    def target(self) -> RectDomain:
        return self.density.domain

    def _check_conditionals(self):
        if self.mode == "separable":
            return
        d = self.target
        axis, other = ("y", "x") if self.mode == "marginal_x_first" else ("x", "y")
        lo, hi = (d.y_min, d.y_max) if axis == "y" else (d.x_min, d.x_max)
        glo, ghi = (d.x_min, d.x_max) if other == "x" else (d.y_min, d.y_max)
        grid_t = np.linspace(lo, hi, 65)
        for g in np.linspace(glo, ghi, 9):
            if not self.density.marginal_pdf(other, g) > 0:
                continue
            c = self.density.conditional_cdf(axis, grid_t, np.full_like(grid_t, g))
            if np.any(np.diff(c) < -1e-12):
                raise MappingError(f"conditional CDF of {axis} is not monotone at {other}={g}")

    def normalized(self, pts):
        s = self.source
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if not s.contains(pts, tol=1e-9).all():
            raise MappingError("point(s) outside the source rectangle")
        tx = np.clip((pts[:, 0] - s.x_min) / s.width, 0.0, 1.0)
        ty = np.clip((pts[:, 1] - s.y_min) / s.height, 0.0, 1.0)
        return tx, ty

    def map_points(self, pts) -> np.ndarray:
        """Vectorised mapping of an ``(n, 2)`` array of source points."""
        tx, ty = self.normalized(pts)
        dens = self.density
        d = self.target
        if dens.kind == "uniform":
            # every CDF is linear: the mapping is the affine rescaling
            if self.source == d:
                return np.asarray(pts, dtype=float).reshape(-1, 2).copy()
            return np.column_stack([d.x_min + tx * d.width, d.y_min + ty * d.height])
        xcdf = lambda s: dens.marginal_cdf("x", s)
        ycdf = lambda s: dens.marginal_cdf("y", s)
        if self.mode == "separable":
            xp = invert_1d(xcdf, tx, d.x_min, d.x_max)
            yp = invert_1d(ycdf, ty, d.y_min, d.y_max)
        elif self.mode == "marginal_x_first":
            xp = invert_1d(xcdf, tx, d.x_min, d.x_max)
            yp = invert_1d(lambda s: dens.conditional_cdf("y", s, xp), ty,
                           d.y_min, d.y_max, check=False)
        else:
            yp = invert_1d(ycdf, ty, d.y_min, d.y_max)
            xp = invert_1d(lambda s: dens.conditional_cdf("x", s, yp), tx,
                           d.x_min, d.x_max, check=False)
        return np.column_stack([xp, yp])


def map_point_separable(spec: MappingSpec, point) -> tuple[float, float]:
    """``(x', y') = (u(x), v(y))`` for a separable density."""
    if spec.mode != "separable":
        raise MappingError("map_point_separable needs a separable mapping spec")
    xp, yp = spec.map_points([point])[0]
    return float(xp), float(yp)


def map_point_marginal(spec: MappingSpec, point) -> tuple[float, float]:
    """Marginal-then-conditional mapping of one point."""
    if spec.mode == "separable":
        raise MappingError("map_point_marginal needs a marginal mapping spec")
    xp, yp = spec.map_points([point])[0]
    return float(xp), float(yp)


def map_topology(spec: MappingSpec, sites) -> np.ndarray:
    """Map generator sites; weights are not transported."""
    return spec.map_points(sites)
