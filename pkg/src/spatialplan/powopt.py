"""Load-equalising power allocation.

Minimises the variance of the coupled cell loads over the data-channel
power vector.  Each outer iteration solves the load fixed point for the
current powers, takes the mean load as the common target and then sweeps
the cells, setting each cell's power so that its own load (with the other
cells' loads and powers held fixed) hits the target.  Own load is strictly
decreasing in own power, so every per-cell solve is a 1-D bisection.

Only power ratios matter: the SIR has no noise term, so ``c * p`` produces
exactly the same loads as ``p``.  Results are normalised to ``max(p) = 1``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Topology
from .loadmodel import GainMatrix, NLCEDivergence, RadioParams, _masses, gain_matrix, solve_nlce


class PowerOptError(ArithmeticError):
    """Power optimisation failed; ``history`` holds the iterations completed."""

    def __init__(self, message, cell=None, history=None):
        super().__init__(message)
        self.cell = cell
        self.history = history or []


@dataclass(frozen=True)
class PowerOptOptions:
    var_tol: float = 1e-6
    max_outer: int = 300
    p_min_ratio: float = 1e-4
    sweep: str = "gauss_seidel"        # or "jacobi"
    bisect_iter: int = 60
    nlce_tol: float = 1e-9
    nlce_max_iter: int = 2000

    def __post_init__(self):
        if self.sweep not in ("gauss_seidel", "jacobi"):
            raise ValueError(f"unknown sweep {self.sweep!r}")
        if not 0 < self.p_min_ratio < 1:
            raise ValueError("p_min_ratio must lie in (0, 1)")
        if not self.var_tol > 0:
            raise ValueError("var_tol must be positive")


@dataclass
class PowerOptResult:
    p_star: np.ndarray
    alpha: np.ndarray
    alpha_bar: float
    residual_var: float
    iterations: int
    converged: bool
    baseline_alpha: np.ndarray
    history: list = field(default_factory=list)   # (iteration, mean, var, max, min)

    @property
    def p_db(self) -> np.ndarray:
        """Powers relative to the strongest cell, in dB."""
        return 10.0 * np.log10(self.p_star)


def _own_load(scale, mass, ratio, cap, power):
    """Load of one cell at own power ``power``; ``ratio`` is gain/interference."""
    sir = np.minimum(power * ratio, cap)
    return scale * np.sum(mass / np.log1p(sir))


def _solve_cell(target, scale, mass, ratio, cap, lo, hi, n_iter):
    """Own power giving ``target`` load, clamped to ``[lo, hi]``.

    Returns ``(power, clamp)`` with ``clamp`` one of ``None``, ``"low"`` or
    ``"high"``.
    """
    if _own_load(scale, mass, ratio, cap, hi) > target:
        return hi, "high"
    if _own_load(scale, mass, ratio, cap, lo) < target:
        return lo, "low"
    a, b = math.log(lo), math.log(hi)
    for _ in range(n_iter):
        m = 0.5 * (a + b)
        if _own_load(scale, mass, ratio, cap, math.exp(m)) > target:
            a = m
        else:
            b = m
    return math.exp(0.5 * (a + b)), None


def _sweep(topology, masses, gain, alpha, power, target, radio, opts, members):
    """One pass of per-cell power updates; returns new powers and clamp list."""
    g = gain.values
    L = topology.L
    p = power.copy()
    a = alpha.copy()
    frozen_p, frozen_a = power, alpha
    clamps = []
    for l in range(L):
        idx = members[l]
        if idx.size == 0 or masses[idx].sum() <= 0:
            continue
        src_p, src_a = (p, a) if opts.sweep == "gauss_seidel" else (frozen_p, frozen_a)
        q = src_p * src_a
        q_l = q[l]
        interference = q @ g[:, idx] - q_l * g[l, idx]
        with np.errstate(divide="ignore"):
            ratio = np.where(interference > 0, g[l, idx] / interference, np.inf)
        new_p, clamp = _solve_cell(target, radio.prefactor, masses[idx], ratio, radio.sir_cap,
                                   opts.p_min_ratio, 1.0, opts.bisect_iter)
        if clamp:
            clamps.append((l, clamp))
        p[l] = new_p
        a[l] = _own_load(radio.prefactor, masses[idx], ratio, radio.sir_cap, new_p)
    return p, clamps


def optimize_power(topology: Topology, density, radio: RadioParams, gain: GainMatrix | None = None,
                   opts: PowerOptOptions = PowerOptOptions(), p0=None) -> PowerOptResult:
    """Power vector that makes all coupled cell loads equal.

    Parameters
    ----------
    topology : Topology
        Fixed cells; only data-channel powers change.
    density : DensityField or array_like
        Demand density or per-element masses on ``topology.grid``.
    radio : RadioParams
    gain : GainMatrix, optional
        Computed from the topology when omitted.
    opts : PowerOptOptions
    p0 : array_like, optional
        Starting powers (default all ones).

    Returns
    -------
    PowerOptResult
        ``converged`` is set when ``Var(alpha) <= opts.var_tol`` and the load
        spread ``max - min`` is at most ``sqrt(L * opts.var_tol)`` (a small
        variance alone still allows one outlying cell).

    Raises
    ------
    PowerOptError
        If the loads diverge at the starting powers, or if the iteration
        ends unconverged with a cell pinned at a power bound.
    """
    if gain is None:
        gain = gain_matrix(topology, radio)
    masses = _masses(topology, density)
    L = topology.L
    p = np.ones(L) if p0 is None else np.asarray(p0, dtype=float) / np.max(p0)
    members = [np.flatnonzero(topology.assignment == l) for l in range(L)]

    def loads(power):
        return solve_nlce(topology, masses, power, radio, gain, tol=opts.nlce_tol,
                          max_iter=opts.nlce_max_iter).alpha

    try:
        alpha = loads(p)
    except NLCEDivergence as exc:
        raise PowerOptError(f"loads diverge at the starting power allocation: {exc}") from exc
    baseline = alpha.copy()
    history = []
    clamps = []
    max_spread = math.sqrt(L * opts.var_tol)
    for it in range(opts.max_outer + 1):
        var = float(alpha.var())
        history.append((it, float(alpha.mean()), var, float(alpha.max()), float(alpha.min())))
        if var <= opts.var_tol and alpha.max() - alpha.min() <= max_spread:
            return PowerOptResult(p, alpha, float(alpha.mean()), var, it, True, baseline, history)
        if it == opts.max_outer:
            break
        target = float(alpha.mean())
        p, clamps = _sweep(topology, masses, gain, alpha, p, target, radio, opts, members)
        p = p / p.max()
        try:
            alpha = loads(p)
        except NLCEDivergence as exc:
            raise PowerOptError(f"loads diverged during optimisation (iteration {it + 1}): {exc}",
                                history=history) from exc
    if clamps:
        cell, side = clamps[0]
        raise PowerOptError(f"cell {cell + 1} cannot reach the common load within the power bounds "
                            f"(pinned {side})", cell, history)
    return PowerOptResult(p, alpha, float(alpha.mean()), float(alpha.var()), opts.max_outer,
                          False, baseline, history)


def verify_scale_freedom(result: PowerOptResult, topology: Topology, density, radio: RadioParams,
                         c: float, gain: GainMatrix | None = None, atol: float = 1e-9) -> bool:
    """Check that powers ``c * p*`` give the same loads as ``p*``."""
    if not c > 0:
        raise ValueError("scale factor must be positive")
    if gain is None:
        gain = gain_matrix(topology, radio)
    ref = solve_nlce(topology, density, result.p_star, radio, gain, tol=1e-13, max_iter=5000).alpha
    scaled = solve_nlce(topology, density, c * result.p_star, radio, gain, tol=1e-13, max_iter=5000).alpha
    return bool(np.all(np.abs(ref - scaled) <= atol))


def write_powers_csv(path, p_star) -> None:
    p_star = np.asarray(p_star, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_index", "p", "p_dB"])
        for idx, v in enumerate(p_star, start=1):
            w.writerow([idx, repr(float(v)), repr(float(10.0 * np.log10(v)))])


def read_powers_csv(path) -> np.ndarray:
    """Powers ordered by ``cell_index`` from a file written by :func:`write_powers_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "p" not in rows[0]:
        raise ValueError(f"{path}: expected columns cell_index, p")
    rows.sort(key=lambda r: int(r["cell_index"]))
    return np.array([float(r["p"]) for r in rows])
