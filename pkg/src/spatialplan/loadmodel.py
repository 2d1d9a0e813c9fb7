"""Load-coupled interference model for downlink cells.

The load of cell ``l`` is the fraction of its resources needed to serve its
demand at the minimum rate,

    alpha_l = (V * R_min * ln 2 / B) * sum_{a in cell l} delta_a / ln(1 + sir_a),

where the SIR of element ``a`` divides the serving signal by interference
from the other cells weighted by their loads.  Loads therefore depend on
each other and the model is solved as a fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .demand import DensityField
from .geometry import RasterGrid, RectDomain, Topology, assign_power_voronoi, lattice_shape, rect_lattice

SIR_CAP = 1e6


class LoadError(ArithmeticError):
    """A cell load is infinite (zero SIR on an element carrying demand)."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class NLCEDivergence(ArithmeticError):
    """The load fixed point did not converge; carries the last two iterates."""

    def __init__(self, message, previous, last, iterations):
        super().__init__(message)
        self.previous = previous
        self.last = last
        self.iterations = iterations

    @property
    def outage_cells(self) -> np.ndarray:
        return np.flatnonzero(~(self.last <= 1.0))


@dataclass(frozen=True)
class RadioParams:
    volume: float = 692.3         # average users, V
    bandwidth: float = 20e6       # Hz, B
    rate_min: float = 1e6         # bit/s, R_min
    exponent: float = 3.0         # path-loss exponent, beta
    d_min: float | None = None    # distance clamp; None = half element diagonal
    sir_cap: float = SIR_CAP

    def __post_init__(self):
        for name in ("volume", "bandwidth", "rate_min", "exponent", "sir_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.exponent < 2:
            raise ValueError("path-loss exponent must be >= 2")
        if self.d_min is not None and not self.d_min > 0:
            raise ValueError("d_min must be positive")

    @property
    def prefactor(self) -> float:
        """``V * R_min * ln 2 / B``."""
        return self.volume * self.rate_min * math.log(2.0) / self.bandwidth


@dataclass
class GainMatrix:
    values: np.ndarray            # (L, A), G = max(d, d_min) ** -beta
    metric: str
    d_min: float


def distances(sites, points, domain: RectDomain | None = None, metric: str = "euclidean") -> np.ndarray:
    """``(L, A)`` distances; ``metric="torus"`` wraps around ``domain``."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    dx = np.abs(sites[:, 0, None] - points[None, :, 0])
    dy = np.abs(sites[:, 1, None] - points[None, :, 1])
    if metric == "torus":
        dx = np.minimum(dx, domain.width - dx)
        dy = np.minimum(dy, domain.height - dy)
    elif metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    return np.sqrt(dx * dx + dy * dy)


def gain_matrix(topology: Topology, radio: RadioParams) -> GainMatrix:
    grid = topology.grid
    d_min = radio.d_min if radio.d_min is not None else grid.half_diagonal()
    d = distances(topology.sites, grid.centers(), grid.domain, topology.metric)
    return GainMatrix(np.maximum(d, d_min) ** (-radio.exponent), topology.metric, d_min)


def sir(element: int, serving: int, alpha, power, gain) -> float:
    """SIR of one element; ``inf`` when no other cell interferes."""
    g = gain.values if isinstance(gain, GainMatrix) else np.asarray(gain)
    alpha = np.asarray(alpha, dtype=float)
    power = np.asarray(power, dtype=float)
    others = np.arange(len(power)) != serving
    interference = float(np.sum(power[others] * g[others, element] * alpha[others]))
    signal = float(power[serving] * g[serving, element])
    if interference == 0.0:
        return math.inf
    return signal / interference


def sir_map(topology: Topology, alpha, power, gain: GainMatrix) -> np.ndarray:
    """SIR of every element (``inf`` where interference vanishes)."""
    signal, interference = kernels.sir_field(topology.assignment, gain.values,
                                             np.asarray(power, dtype=float), np.asarray(alpha, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(interference > 0, signal / interference, np.inf)


def _masses(topology: Topology, density) -> np.ndarray:
    if isinstance(density, DensityField):
        return density.masses(topology.grid)
    m = np.asarray(density, dtype=float).ravel()
    if m.size != topology.grid.size:
        raise ValueError("mass raster does not match the topology grid")
    return m


def cell_loads(topology: Topology, density, alpha, power, radio: RadioParams, gain: GainMatrix) -> np.ndarray:
    """One application of the load map ``f(alpha, p)``.

    Element SIRs are capped at ``radio.sir_cap`` (this covers the
    interference-free case and keeps the map monotone in ``alpha``).
    """
    masses = _masses(topology, density)
    power = np.asarray(power, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    signal, interference = kernels.sir_field(topology.assignment, gain.values, power, alpha)
    dead = (signal <= 0.0) & (masses > 0.0)
    if dead.any():
        a = int(np.flatnonzero(dead)[0])
        raise LoadError(f"zero SIR at element {a} (cell {int(topology.assignment[a]) + 1}): infinite load", a)
    sums = kernels.load_sums(topology.assignment, masses, signal, interference, topology.L, radio.sir_cap)
    return radio.prefactor * sums


@dataclass
class NLCEResult:
    alpha: np.ndarray
    iterations: int
    trace: list = field(default_factory=list)

    @property
    def outage_cells(self) -> np.ndarray:
        """Indices of cells whose load exceeds one."""
        return np.flatnonzero(self.alpha > 1.0)


def solve_nlce(topology: Topology, density, power, radio: RadioParams, gain: GainMatrix | None = None,
               tol: float = 1e-9, max_iter: int = 500, record: bool = False,
               blowup: float = 1e6) -> NLCEResult:
    """Fixed-point iteration ``alpha <- f(alpha, p)`` from ``alpha = 0``.

    Stops when the sup-norm step falls below ``tol``.  Raises
    :class:`NLCEDivergence` after ``max_iter`` iterations or as soon as a
    load exceeds ``blowup``.
    """
    power = np.asarray(power, dtype=float)
    if power.shape != (topology.L,) or not np.all(power > 0):
        raise ValueError("power vector must be positive with one entry per cell")
    if gain is None:
        gain = gain_matrix(topology, radio)
    masses = _masses(topology, density)
    alpha = np.zeros(topology.L)
    trace = [alpha.copy()] if record else []
    for it in range(1, max_iter + 1):
        new = cell_loads(topology, masses, alpha, power, radio, gain)
        if record:
            trace.append(new.copy())
        step = np.max(np.abs(new - alpha))
        if not np.all(np.isfinite(new)) or new.max() > blowup:
            raise NLCEDivergence(f"loads diverged after {it} iterations (max {new.max():.3g})", alpha, new, it)
        if step < tol:
            return NLCEResult(new, it, trace)
        previous, alpha = alpha, new
    raise NLCEDivergence(f"no convergence in {max_iter} iterations (last step {step:.3g})",
                         previous, alpha, max_iter)


# --- canonical (torus) analysis --------------------------------------------

def torus_topology(domain: RectDomain, cols: int, rows: int, grid: RasterGrid | None = None,
                   cell_resolution: int = 40) -> Topology:
    """Rectangular lattice on the flat torus over ``domain``.

    Without an explicit grid, each lattice cell gets ``cell_resolution``
    elements per side so every cell sees an identical raster.
    """
    if grid is None:
        grid = RasterGrid(domain, cols * cell_resolution, rows * cell_resolution)
    sites = rect_lattice(domain, cols, rows)
    return assign_power_voronoi(sites, np.zeros(len(sites)), grid, metric="torus")


def uniform_torus_load(radio: RadioParams, topology: Topology, tol: float = 1e-12,
                       max_iter: int = 10000, cell: int = 0) -> float:
    """Load of one lattice cell when all cells carry the same load.

    On a symmetric torus lattice with uniform demand and power the fixed
    point is uniform, so the scalar equation for a single cell suffices.
    Returns ``inf`` if the scalar iteration diverges.
    """
    grid = topology.grid
    mine = np.flatnonzero(topology.assignment == cell)
    pts = grid.centers()[mine]
    d_min = radio.d_min if radio.d_min is not None else grid.half_diagonal()
    g = np.maximum(distances(topology.sites, pts, grid.domain, "torus"), d_min) ** (-radio.exponent)
    own = g[cell]
    others = g.sum(axis=0) - own
    ratio = own / others if topology.L > 1 else np.full(len(mine), np.inf)
    mass = 1.0 / grid.size
    load = 0.0
    for _ in range(max_iter):
        with np.errstate(divide="ignore"):
            s = np.minimum(ratio / load, radio.sir_cap) if load > 0 else np.full(len(mine), radio.sir_cap)
        new = radio.prefactor * mass * np.sum(1.0 / np.log1p(s))
        if new > 1e6:
            return math.inf
        if abs(new - load) < tol:
            return float(new)
        load = new
    return math.inf


@dataclass
class DimensionResult:
    L: int
    cols: int
    rows: int
    load: float
    table: list


def dimension(radio: RadioParams, domain: RectDomain, target_load: float = 0.9,
              max_cells: int = 200, cell_resolution: int = 40) -> DimensionResult:
    """Smallest lattice size whose uniform torus load is at most ``target_load``.

    Candidate sizes ``L = 1, 2, ...`` each use the factor pair closest to the
    domain's aspect ratio.  ``table`` lists ``(L, cols, rows, load)`` for every
    size evaluated.
    """
    table = []
    for n in range(1, max_cells + 1):
        cols, rows = lattice_shape(n, domain)
        topo = torus_topology(domain, cols, rows, cell_resolution=cell_resolution)
        load = uniform_torus_load(radio, topo)
        table.append((n, cols, rows, load))
        if load <= target_load:
            return DimensionResult(n, cols, rows, load, table)
    raise ValueError(f"no lattice with at most {max_cells} cells reaches load {target_load}")
