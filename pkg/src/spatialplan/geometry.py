"""Rectangular domains, raster grids and power-Voronoi cell assignment.

Cells are defined with the additively weighted metric: an area element at
``a`` belongs to the site ``l`` that minimises ``|a - a_l| - w_l``.  All
region integrals are midpoint sums over the raster elements.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


class GeometryError(ValueError):
    """Invalid domain, grid or site configuration."""


@dataclass(frozen=True)
class RectDomain:
    x_min: float = 0.0
    x_max: float = 6.0
    y_min: float = 0.0
    y_max: float = 4.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GeometryError(f"degenerate domain {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return ((pts[:, 0] >= self.x_min - tol) & (pts[:, 0] <= self.x_max + tol)
                & (pts[:, 1] >= self.y_min - tol) & (pts[:, 1] <= self.y_max + tol))


@dataclass(frozen=True)
class RasterGrid:
    """Midpoint raster of ``nx`` by ``ny`` area elements over a domain.

    Elements are indexed row-major: ``a = j * nx + i`` where ``j`` is the
    row (y) index and ``i`` the column (x) index.
    """

    domain: RectDomain
    nx: int = 300
    ny: int = 200

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise GeometryError(f"grid needs at least 2x2 elements, got {self.nx}x{self.ny}")

    @property
    def dx(self) -> float:
        return self.domain.width / self.nx

    @property
    def dy(self) -> float:
        return self.domain.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def xs(self) -> np.ndarray:
        return self.domain.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def ys(self) -> np.ndarray:
        return self.domain.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def centers(self) -> np.ndarray:
        """``(A, 2)`` array of element centres in row-major order."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def half_diagonal(self) -> float:
        return 0.5 * float(np.hypot(self.dx, self.dy))


@dataclass
class Topology:
    """Sites, their power-Voronoi weights and the raster cell assignment."""

    sites: np.ndarray
    weights: np.ndarray
    assignment: np.ndarray
    grid: RasterGrid
    metric: str = "euclidean"
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return len(self.sites)

    def cell_sizes(self) -> np.ndarray:
        """Number of area elements per cell."""
        return np.bincount(self.assignment, minlength=self.L)

    def cell_areas(self) -> np.ndarray:
        return self.cell_sizes() * self.grid.cell_area

    def empty_cells(self) -> np.ndarray:
        return np.flatnonzero(self.cell_sizes() == 0)


def _period(grid: RasterGrid, metric: str):
    if metric == "euclidean":
        return None
    if metric == "torus":
        return (grid.domain.width, grid.domain.height)
    raise GeometryError(f"unknown metric {metric!r}")


def assign_power_voronoi(sites, weights, grid: RasterGrid, metric: str = "euclidean") -> Topology:
    """Assign every element of ``grid`` to its power-Voronoi cell.

    Parameters
    ----------
    sites : array_like, shape (L, 2)
        Generator positions; all must lie inside ``grid.domain``.
    weights : array_like, shape (L,)
        Additive weights; a larger weight enlarges the cell.
    grid : RasterGrid
    metric : {"euclidean", "torus"}
        ``"torus"`` uses wrap-around distances over the domain rectangle.

    Returns
    -------
    Topology
    """
    sites = np.array(sites, dtype=float).reshape(-1, 2)
    weights = np.array(weights, dtype=float).reshape(-1)
    if len(sites) == 0:
        raise GeometryError("site list is empty")
    if len(weights) != len(sites):
        raise GeometryError(f"{len(sites)} sites but {len(weights)} weights")
    outside = ~grid.domain.contains(sites, tol=1e-12)
    if outside.any():
        raise GeometryError(f"site(s) {np.flatnonzero(outside).tolist()} outside the domain")
    labels = kernels.assign(grid.centers(), sites, weights, _period(grid, metric))
    return Topology(sites=sites, weights=weights, assignment=labels, grid=grid, metric=metric)


def voronoi(sites, grid: RasterGrid, metric: str = "euclidean") -> Topology:
    """Standard (unweighted) Voronoi assignment."""
    sites = np.array(sites, dtype=float).reshape(-1, 2)
    return assign_power_voronoi(sites, np.zeros(len(sites)), grid, metric)


def mass_centroids(topology: Topology, masses) -> np.ndarray:
    """Demand-weighted centroid of each cell.

    ``masses`` are per-element demand masses (the normalised density times
    the element area).  Cells with zero demand keep their current generator.
    """
    masses = np.asarray(masses, dtype=float)
    m, mx, my = kernels.cell_moments(topology.assignment, masses, topology.grid.centers(), topology.L)
    out = topology.sites.copy()
    ok = m > 0.0
    out[ok, 0] = mx[ok] / m[ok]
    out[ok, 1] = my[ok] / m[ok]
    return out


def rect_lattice(domain: RectDomain, cols: int, rows: int) -> np.ndarray:
    """Sites at the centres of a ``cols`` x ``rows`` rectangular partition."""
    xs = domain.x_min + (np.arange(cols) + 0.5) * domain.width / cols
    ys = domain.y_min + (np.arange(rows) + 0.5) * domain.height / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def lattice_shape(n_cells: int, domain: RectDomain) -> tuple[int, int]:
    """Factor pair ``(cols, rows)`` with cell aspect closest to square.

    Of all ``cols * rows == n_cells`` the pair whose ``cols / rows`` ratio is
    closest (in log scale) to the domain's width/height ratio is chosen.
    """
    if n_cells < 1:
        raise GeometryError("need at least one cell")
    target = np.log(domain.width / domain.height)
    best = None
    for cols in range(1, n_cells + 1):
        if n_cells % cols:
            continue
        rows = n_cells // cols
        err = abs(np.log(cols / rows) - target)
        if best is None or err < best[0] - 1e-12:
            best = (err, cols, rows)
    return best[1], best[2]


# --- serialisation -------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_topology_csv(path, sites, weights=None) -> None:
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    weights = np.zeros(len(sites)) if weights is None else np.asarray(weights, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site_index", "x", "y", "weight"])
        for idx, ((x, y), wt) in enumerate(zip(sites, weights), start=1):
            w.writerow([idx, _fmt(x), _fmt(y), _fmt(wt)])


def read_topology_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(sites, weights)`` ordered by ``site_index``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise GeometryError(f"{path}: no sites")
    missing = {"site_index", "x", "y"} - set(rows[0])
    if missing:
        raise GeometryError(f"{path}: missing columns {sorted(missing)}")
    rows.sort(key=lambda r: int(r["site_index"]))
    sites = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    weights = np.array([float(r.get("weight") or 0.0) for r in rows])
    return sites, weights


def write_assignment_grid(path, topology: Topology) -> None:
    """Row-major integer grid of 1-based cell indices with an ``nx ny`` header."""
    g = topology.grid
    labels = topology.assignment.reshape(g.ny, g.nx) + 1
    with open(path, "w") as fh:
        fh.write(f"{g.nx} {g.ny}\n")
        for row in labels:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")


def read_assignment_grid(path) -> np.ndarray:
    """Inverse of :func:`write_assignment_grid`; returns 0-based labels."""
    with open(path) as fh:
        nx, ny = (int(t) for t in fh.readline().split())
        values = np.array(fh.read().split(), dtype=np.intp)
    if values.size != nx * ny:
        raise GeometryError(f"{path}: expected {nx * ny} labels, found {values.size}")
    return values - 1
