"""Acceptance gate: one PASS/FAIL line per criterion (see the terminal summary)."""
import filecmp
import time

import numpy as np
import oracles
from spatialplan import DensityField, MappingSpec, RadioParams, RasterGrid, RectDomain, solve_nlce, voronoi
from spatialplan.cli import run_pipeline
from spatialplan.geometry import assign_power_voronoi, rect_lattice
from spatialplan.loadmodel import NLCEDivergence, cell_loads, gain_matrix, torus_topology
from spatialplan.powopt import verify_scale_freedom
from spatialplan.scenario import parse_scenario

DOMAIN = RectDomain()
RADIO = RadioParams()


def test_criterion_1_closed_form_mapping(verdict):
    t0 = time.perf_counter()
    xs, ys = np.meshgrid(np.linspace(0, 6, 50), np.linspace(0, 4, 50))
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    errs = []
    for name, mode, ref in (("x_exp_negy", "separable", oracles.g1m), ("x_plus_y", "marginal_x_first", oracles.g2m)):
        got = MappingSpec(DOMAIN, DensityField.builtin(name, DOMAIN), mode).map_points(pts)
        rx, ry = ref(pts[:, 0], pts[:, 1])
        errs.append(float(np.max(np.abs(got - np.column_stack([rx, ry])))))
    dt = time.perf_counter() - t0
    verdict(1, max(errs) <= 1e-6 and dt < 5.0,
            f"max |err| g1m {errs[0]:.2e}, g2m {errs[1]:.2e} (tol 1e-6); {dt:.2f} s (limit 5 s)")


def test_criterion_2_pushforward_volume(verdict):
    t0 = time.perf_counter()
    worst = {}
    for name, mode, ycum in (("x_exp_negy", "separable", oracles.ycum1),
                             ("x_plus_y", "marginal_x_first", oracles.ycum2)):
        spec = MappingSpec(DOMAIN, DensityField.builtin(name, DOMAIN), mode)
        masses = oracles.image_bin_masses(spec.map_points, ycum, nx=300)
        worst[name] = float(np.max(np.abs(masses * 64 - 1.0)))
    dt = time.perf_counter() - t0
    verdict(2, max(worst.values()) <= 0.02 and dt < 10.0,
            f"worst relative bin error x_exp_negy {worst['x_exp_negy']:.2e}, x_plus_y {worst['x_plus_y']:.2e} "
            f"(tol 2%); {dt:.2f} s (limit 10 s)")


def test_criterion_3_share_gap(t2c_plan, verdict):
    res, dt = t2c_plan
    gaps = [mx - mn for it, mx, mn, c, d in res.log if it <= 400]
    best = min(gaps)
    at200 = min(g for (it, *_), g in zip(res.log, gaps) if it <= 200)
    verdict(3, best <= 0.015 and dt < 60.0,
            f"min share gap by iteration 400 {best:.4%} (tol 1.5%), by 200 {at200:.4%}; "
            f"converged={res.converged} at {res.iterations}; {dt:.1f} s (limit 60 s)")


def test_criterion_4_torus_flat_load(verdict):
    topo = torus_topology(DOMAIN, 6, 5)
    masses = np.full(topo.grid.size, 1.0 / topo.grid.size)
    gain = gain_matrix(topo, RADIO)
    alpha = solve_nlce(topo, masses, np.ones(30), RADIO, gain, tol=1e-13, max_iter=5000).alpha
    spread = float(alpha.max() - alpha.min())
    loads = []
    for v in (400.0, 550.0, 692.3, 800.0):
        r = RadioParams(volume=v)
        loads.append(float(solve_nlce(topo, masses, np.ones(30), r, gain, tol=1e-13, max_iter=5000).alpha.mean()))
    monotone = all(b > a for a, b in zip(loads, loads[1:]))
    value = float(alpha.mean())
    verdict(4, spread < 1e-9 and monotone and 0 < value < 1.2,
            f"spread {spread:.1e} (tol 1e-9); load {value:.4f} vs reference 0.91; "
            f"monotone in V {monotone} ({', '.join(f'{x:.3f}' for x in loads)})")


def test_criterion_5_two_cell_fixed_point(verdict):
    t0 = time.perf_counter()
    grid = RasterGrid(DOMAIN, 30, 20)
    sites = np.array([[1.5, 2.0], [4.5, 2.0]])
    p = np.array([1.0, 0.6])
    radio = RadioParams(volume=80.0)      # two cells carry a light network; loads near 0.5
    topo = assign_power_voronoi(sites, np.zeros(2), grid)
    masses = np.full(grid.size, 1.0 / grid.size)
    gain = gain_matrix(topo, radio)
    res = solve_nlce(topo, masses, p, radio, gain, tol=1e-13, max_iter=5000, record=True)
    residual = float(np.max(np.abs(cell_loads(topo, masses, res.alpha, p, radio, gain) - res.alpha)))
    a1, a2, _ = oracles.two_cell_loads(sites, p, radio.prefactor)
    diff = float(np.max(np.abs(res.alpha - [a1, a2])))
    trace = np.array(res.trace)
    monotone = bool(np.all(np.diff(trace, axis=0) >= -1e-15))
    dt = time.perf_counter() - t0
    verdict(5, residual <= 1e-9 and diff <= 1e-9 and monotone and dt < 1.0,
            f"alpha=({res.alpha[0]:.6f}, {res.alpha[1]:.6f}); residual {residual:.1e}, "
            f"vs scalar iteration {diff:.1e} (tol 1e-9); monotone {monotone}; {dt:.2f} s (limit 1 s)")


def test_criterion_6_power_optimization_flattens(optimized, verdict):
    ok = True
    parts = []
    for name, (topo, res, dt) in optimized.items():
        good = res.converged and res.residual_var <= 1e-6 and res.alpha.max() < 1.0 and dt < 300
        ok &= bool(good)
        parts.append(f"{name}: Var {res.residual_var:.1e}, mean {res.alpha_bar:.4f}, max {res.alpha.max():.4f}, "
                     f"{res.iterations} it, {dt:.1f} s")
    verdict(6, ok, "; ".join(parts) + " (tol Var 1e-6, loads < 1, 300 s)")


def test_criterion_7_scale_freedom(optimized, d2, verdict):
    t0 = time.perf_counter()
    topo, res, _ = optimized["T2c"]
    gain = gain_matrix(topo, RADIO)
    ok = all(verify_scale_freedom(res, topo, d2, RADIO, c, gain, atol=1e-9) for c in (0.5, 2.0, 10.0))
    dt = time.perf_counter() - t0
    verdict(7, ok and dt < 30.0, f"loads at c*p* equal loads at p* for c in (0.5, 2, 10): {ok} "
                                 f"(tol 1e-9); {dt:.1f} s (limit 30 s)")


def test_criterion_8_uniform_power_outage(grid, verdict):
    d1 = DensityField.builtin("x_exp_negy", DOMAIN)
    topo = voronoi(MappingSpec(DOMAIN, d1, "separable").map_points(rect_lattice(DOMAIN, 6, 5)), grid)
    try:
        res = solve_nlce(topo, d1, np.ones(topo.L), RADIO, max_iter=20000)
        alpha = res.alpha
        outage, how = int(np.sum(alpha > 1.0)), f"fixed point after {res.iterations} iterations, max load {alpha.max():.1f}"
    except NLCEDivergence as exc:
        outage, how = len(exc.outage_cells), f"diverged after {exc.iterations} iterations"
    verdict(8, outage >= 1, f"{outage} of {topo.L} cells with load > 1 ({how})")


def test_criterion_9_determinism(tmp_path, verdict):
    text = "[domain]\nnx = 150\nny = 100\n[density]\nkind = x_plus_y\n[dimension]\nnum_cells = 12\n[radio]\nvolume = 250\n" \
           "[planner]\nN = 50\nmax_outer_iterations = 300\n[run]\nmethod = cvt\nseed = 3\n"
    reports = [run_pipeline(parse_scenario(text), tmp_path / f"run{k}") for k in range(2)]
    names = sorted(p.name for p in reports[0].written if p.suffix == ".csv")
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "run0", tmp_path / "run1", names, shallow=False)
    verdict(9, len(names) > 5 and not mismatch and not errors,
            f"{len(match)} of {len(names)} CSVs byte-identical across two runs")
