"""Density-driven site placement with share-equalising power-Voronoi weights.

:func:`cva` runs plain density-weighted Lloyd iterations.  :func:`plan`
starts from that baseline and then alternates centroid updates with
shrinking the weight of the most loaded cell until the per-cell demand
share is uniform (its coefficient of variation drops below ``epsilon``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .demand import DensityField, cov
from .geometry import RasterGrid, Topology, assign_power_voronoi, mass_centroids, voronoi

LOG_COLUMNS = ("iteration", "max_share", "min_share", "CoV", "delta")


@dataclass(frozen=True)
class PlannerParams:
    N: int = 200                       # Lloyd iterations for the baseline
    delta: float | None = None         # initial weight decrement; None -> -0.005 * diagonal
    kappa: float = 0.9                 # decrement decay factor
    period: int = 25                   # decay every `period` outer iterations
    epsilon: float = 0.01              # CoV stopping threshold
    max_outer_iterations: int = 2000
    rng_seed: int = 0
    fixed_sites: bool = False          # adjust weights only, never move sites

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if self.delta is not None and not self.delta < 0:
            raise ValueError("delta must be negative")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")

    def initial_delta(self, grid: RasterGrid) -> float:
        return self.delta if self.delta is not None else -0.005 * grid.domain.diagonal


@dataclass
class PlanResult:
    topology: Topology
    shares: np.ndarray                 # fractions of the demand volume
    converged: bool
    iterations: int
    log: list = field(default_factory=list)
    baseline: Topology | None = None

    @property
    def cov(self) -> float:
        return cov(self.shares)

    @property
    def gap(self) -> float:
        return float(self.shares.max() - self.shares.min())


def random_sites(grid: RasterGrid, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = grid.domain
    return np.column_stack([rng.uniform(d.x_min, d.x_max, n), rng.uniform(d.y_min, d.y_max, n)])


def _masses(density, grid):
    if isinstance(density, DensityField):
        return density.masses(grid)
    return np.asarray(density, dtype=float).ravel()


def _fractions(topology: Topology, masses) -> np.ndarray:
    return np.bincount(topology.assignment, weights=masses, minlength=topology.L)


def cva(initial_sites, density, grid: RasterGrid, N: int = 200) -> Topology:
    """Density-weighted Lloyd iterations on the standard Voronoi diagram."""
    masses = _masses(density, grid)
    sites = np.array(initial_sites, dtype=float).reshape(-1, 2)
    topo = voronoi(sites, grid)
    for _ in range(N):
        new_sites = mass_centroids(topo, masses)
        if np.array_equal(new_sites, topo.sites):
            break
        topo = voronoi(new_sites, grid)
    return topo


def plan(initial_sites, density, grid: RasterGrid, params: PlannerParams = PlannerParams()) -> PlanResult:
    """Centroidal plus power-Voronoi planning.

    Each outer iteration moves the generators to the mass centroids of the
    current cells (skipped with ``fixed_sites``), recomputes the power
    diagram with the current weights and evaluates the demand shares.  If
    their CoV is below ``epsilon`` the topology is returned; otherwise the
    weight of the cell with the largest share is lowered by ``delta`` and
    ``delta`` is multiplied by ``kappa`` every ``period`` iterations.

    If ``max_outer_iterations`` is exhausted the topology with the lowest
    CoV seen is returned with ``converged=False``.
    """
    sites = np.array(initial_sites, dtype=float).reshape(-1, 2)
    if len(sites) < 2:
        raise ValueError("planning needs at least two sites")
    masses = _masses(density, grid)
    if params.fixed_sites:
        baseline = voronoi(sites, grid)
    else:
        baseline = cva(sites, masses, grid, params.N)
    weights = np.zeros(len(sites))
    delta = params.initial_delta(grid)
    prev = baseline
    log = []
    best = None
    for i in range(1, params.max_outer_iterations + 1):
        gens = prev.sites if params.fixed_sites else mass_centroids(prev, masses)
        topo = assign_power_voronoi(gens, weights.copy(), grid)
        frac = _fractions(topo, masses)
        c = cov(frac)
        log.append((i, float(frac.max()), float(frac.min()), c, delta))
        if best is None or c < best[0]:
            best = (c, topo, frac, i)
        if c < params.epsilon:
            return PlanResult(topo, frac, True, i, log, baseline)
        j = int(np.argmax(frac))
        weights[j] += delta
        if i % params.period == 0:
            delta *= params.kappa
        prev = topo
    _, topo, frac, _ = best
    return PlanResult(topo, frac, False, params.max_outer_iterations, log, baseline)


def write_log_csv(path, log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for it, mx, mn, c, d in log:
            w.writerow([it, repr(mx), repr(mn), repr(c), repr(d)])
