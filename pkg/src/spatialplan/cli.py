"""Command-line interface: ``spatialplan <subcommand> SCENARIO [options]``.

Subcommands
-----------
dimension  lattice size meeting the target load on the torus
map        transport a lattice into the scenario density
plan       centroidal + power-Voronoi planning from random or given sites
load       coupled cell loads of a topology at given (or uniform) powers
optimize   load-equalising power allocation for a topology
pipeline   dimension -> lattice -> map/plan -> loads -> power optimisation

Every subcommand writes its CSV/SVG outputs to ``-o/--output``, else the
scenario's ``output_dir``, else ``$SPATIALPLAN_OUTPUT_DIR``, else ``./out``.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence,
4 I/O failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demand import cov, demand_share, write_raster
from .geometry import Topology, assign_power_voronoi, lattice_shape, read_topology_csv, rect_lattice, voronoi
from .loadmodel import NLCEDivergence, dimension, gain_matrix, sir_map, solve_nlce, torus_topology, uniform_torus_load
from .mapping import MappingSpec, map_topology
from .planner import plan, random_sites
from .powopt import optimize_power, read_powers_csv
from .report import Artifacts, emit_report, write_loads_csv
from .scenario import Scenario, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
REFERENCE_TORUS_LOAD = 0.91


class StageError(RuntimeError):
    """A pipeline stage failed; ``written`` lists artifacts of completed stages."""

    def __init__(self, stage, cause, written):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.written = list(written)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, ArithmeticError):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_INVALID
    raise exc


# --- stage helpers -----------------------------------------------------------

def _lattice_size(sc: Scenario, art: Artifacts) -> tuple[int, int]:
    if sc.num_cells is not None:
        cols, rows = lattice_shape(sc.num_cells, sc.domain)
        topo = torus_topology(sc.domain, cols, rows, cell_resolution=sc.cell_resolution)
        load = uniform_torus_load(sc.radio, topo)
    else:
        res = dimension(sc.radio, sc.domain, sc.target_load, sc.max_cells, sc.cell_resolution)
        art.dimension = res
        cols, rows, load = res.cols, res.rows, res.load
    art.summary.update(L=cols * rows, lattice_cols=cols, lattice_rows=rows,
                       torus_uniform_load=float(load), torus_reference_load=REFERENCE_TORUS_LOAD)
    return cols, rows


def _map_stage(sc: Scenario, lattice, art: Artifacts) -> Topology:
    spec = MappingSpec(sc.domain, sc.density(), sc.mapping_mode)
    sites = map_topology(spec, lattice)
    return voronoi(sites, sc.grid, sc.metric)


def _plan_stage(sc: Scenario, sites, art: Artifacts) -> Topology:
    res = plan(sites, sc.density(), sc.grid, sc.planner)
    art.plan_log = res.log
    art.summary.update(plan_converged=res.converged, plan_iterations=res.iterations)
    return res.topology


def _shares(sc: Scenario, topo: Topology, masses, art: Artifacts) -> None:
    art.topology = topo
    share = demand_share(topo, masses, sc.radio.volume)
    art.shares = share
    art.summary.update(cov_share=cov(share.shares), share_gap=share.gap)


def _uniform_loads(sc: Scenario, topo: Topology, masses, gain, art: Artifacts, power=None) -> bool:
    """Loads at ``power`` (uniform by default); returns False on divergence."""
    p = np.ones(topo.L) if power is None else power
    try:
        alpha = solve_nlce(topo, masses, p, sc.radio, gain, tol=sc.powopt.nlce_tol,
                           max_iter=sc.powopt.nlce_max_iter).alpha
        diverged = False
    except NLCEDivergence as exc:
        alpha, diverged = exc.last, True
    art.loads_uniform = alpha
    art.loads_uniform_diverged = diverged
    art.summary.update(before_diverged=diverged, before_outage_cells=int(np.sum(~(alpha <= 1.0))))
    if not diverged:
        art.summary.update(before_mean=float(alpha.mean()), before_var=float(alpha.var()),
                           before_max=float(alpha.max()), before_min=float(alpha.min()))
    return not diverged


def _optimize(sc: Scenario, topo: Topology, masses, gain, art: Artifacts, p0=None) -> None:
    res = optimize_power(topo, masses, sc.radio, gain, sc.powopt, p0=p0)
    art.power = res
    art.summary.update(after_converged=res.converged, after_iterations=res.iterations,
                       after_mean=res.alpha_bar, after_var=res.residual_var,
                       after_max=float(res.alpha.max()), after_min=float(res.alpha.min()),
                       p_min_db=float(res.p_db.min()))


@dataclass
class RunReport:
    outdir: Path
    summary: dict
    written: list = field(default_factory=list)


def run_pipeline(sc: Scenario, outdir=None) -> RunReport:
    """Run all stages and write every artifact to the output directory.

    Raises
    ------
    StageError
        Naming the failing stage; artifacts of the completed stages are
        written before raising.
    """
    out = sc.resolve_output(outdir)
    art = Artifacts()
    art.summary.update(density=sc.density_kind, method=sc.method, metric=sc.metric, seed=sc.seed)
    stage = "setup"
    try:
        masses = sc.density().masses(sc.grid)
        stage = "dimension"
        cols, rows = _lattice_size(sc, art)
        art.lattice = rect_lattice(sc.domain, cols, rows)
        if sc.method == "mapping":
            stage = "map"
            topo = _map_stage(sc, art.lattice, art)
        else:
            stage = "plan"
            topo = _plan_stage(sc, random_sites(sc.grid, cols * rows, sc.seed), art)
        _shares(sc, topo, masses, art)
        stage = "load"
        gain = gain_matrix(topo, sc.radio)
        _uniform_loads(sc, topo, masses, gain, art)
        stage = "optimize"
        _optimize(sc, topo, masses, gain, art)
    except (ValueError, ArithmeticError) as exc:
        written = emit_report(art, out)
        raise StageError(stage, exc, written) from exc
    return RunReport(out, art.summary, emit_report(art, out))


# --- subcommands ---------------------------------------------------------------

def _topology_from(sc: Scenario, path) -> Topology:
    sites, weights = read_topology_csv(path)
    return assign_power_voronoi(sites, weights, sc.grid, sc.metric)


def cmd_dimension(sc, args, out):
    art = Artifacts()
    cols, rows = _lattice_size(sc, art)
    art.lattice = rect_lattice(sc.domain, cols, rows)
    emit_report(art, out)
    print(f"L = {cols * rows} ({cols} x {rows}), uniform torus load {art.summary['torus_uniform_load']:.4f} "
          f"(reference {REFERENCE_TORUS_LOAD})")
    return EXIT_OK


def cmd_map(sc, args, out):
    art = Artifacts()
    lattice, _ = read_topology_csv(args.lattice)
    topo = _map_stage(sc, lattice, art)
    _shares(sc, topo, sc.density().masses(sc.grid), art)
    emit_report(art, out)
    print(f"mapped {topo.L} sites; CoV(share) = {art.summary['cov_share']:.4f}")
    return EXIT_OK


def cmd_plan(sc, args, out):
    art = Artifacts()
    if args.sites is not None:
        sites, _ = read_topology_csv(args.sites)
    else:
        n = args.num_cells
        if n is None:
            cols, rows = _lattice_size(sc, art)
            n = cols * rows
        sites = random_sites(sc.grid, n, sc.seed)
    topo = _plan_stage(sc, sites, art)
    _shares(sc, topo, sc.density().masses(sc.grid), art)
    emit_report(art, out)
    print(f"planned {topo.L} cells in {art.summary['plan_iterations']} iterations; "
          f"CoV(share) = {art.summary['cov_share']:.4f}, converged = {art.summary['plan_converged']}")
    return EXIT_OK


def cmd_load(sc, args, out):
    art = Artifacts()
    topo = _topology_from(sc, args.topology)
    masses = sc.density().masses(sc.grid)
    gain = gain_matrix(topo, sc.radio)
    power = read_powers_csv(args.power) if args.power else None
    ok = _uniform_loads(sc, topo, masses, gain, art, power)
    out.mkdir(parents=True, exist_ok=True)
    write_loads_csv(out / "loads.csv", art.loads_uniform)
    if args.sir_map:
        p = np.ones(topo.L) if power is None else power
        s = np.minimum(sir_map(topo, art.loads_uniform, p, gain), sc.radio.sir_cap)
        write_raster(out / "sir.raster", sc.domain, s.reshape(sc.ny, sc.nx))
    alpha = art.loads_uniform
    if not ok:
        print(f"loads diverge: {art.summary['before_outage_cells']} of {topo.L} cells in outage",
              file=sys.stderr)
        return EXIT_NUMERIC
    print(f"loads: mean {alpha.mean():.4f}, min {alpha.min():.4f}, max {alpha.max():.4f}, "
          f"outage cells {art.summary['before_outage_cells']}")
    return EXIT_OK


def cmd_optimize(sc, args, out):
    art = Artifacts()
    topo = _topology_from(sc, args.topology)
    art.topology = topo
    masses = sc.density().masses(sc.grid)
    gain = gain_matrix(topo, sc.radio)
    p0 = read_powers_csv(args.p0) if args.p0 else None
    _uniform_loads(sc, topo, masses, gain, art, p0)
    _optimize(sc, topo, masses, gain, art, p0)
    emit_report(art, out)
    s = art.summary
    print(f"optimized in {s['after_iterations']} iterations: mean load {s['after_mean']:.4f}, "
          f"Var {s['after_var']:.2e}, min power {s['p_min_db']:.1f} dB, converged = {s['after_converged']}")
    return EXIT_OK if s["after_converged"] else EXIT_NUMERIC


def cmd_pipeline(sc, args, out):
    rep = run_pipeline(sc, out)
    s = rep.summary
    print(f"L = {s['L']}, torus load {s['torus_uniform_load']:.4f} (reference {REFERENCE_TORUS_LOAD}), "
          f"CoV(share) = {s['cov_share']:.4f}")
    if s["before_diverged"]:
        print(f"uniform power: loads diverge, {s['before_outage_cells']} cells in outage")
    else:
        print(f"uniform power: loads {s['before_min']:.4f}..{s['before_max']:.4f}")
    print(f"optimized: mean load {s['after_mean']:.4f}, Var {s['after_var']:.2e}")
    print(f"wrote {len(rep.written)} files to {rep.outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatialplan", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario", type=Path, help="scenario file")
        p.add_argument("-o", "--output", type=Path, default=None, help="output directory")
        p.set_defaults(func=func)
        return p

    add("dimension", cmd_dimension, "lattice size meeting the target load")
    p = add("map", cmd_map, "map a lattice into the scenario density")
    p.add_argument("--lattice", type=Path, required=True, help="lattice site CSV")
    p = add("plan", cmd_plan, "centroidal + power-Voronoi planning")
    p.add_argument("--sites", type=Path, default=None, help="initial site CSV (default: random)")
    p.add_argument("--num-cells", type=int, default=None, help="number of random sites")
    p = add("load", cmd_load, "coupled cell loads of a topology")
    p.add_argument("--topology", type=Path, required=True, help="topology CSV")
    p.add_argument("--power", type=Path, default=None, help="powers CSV (default: uniform)")
    p.add_argument("--sir-map", action="store_true", help="also write the per-element SIR raster")
    p = add("optimize", cmd_optimize, "load-equalising power allocation")
    p.add_argument("--topology", type=Path, required=True, help="topology CSV")
    p.add_argument("--p0", type=Path, default=None, help="starting powers CSV")
    add("pipeline", cmd_pipeline, "run every stage")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        return args.func(sc, args, sc.resolve_output(args.output))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for path in exc.written:
            print(f"  completed: {path}", file=sys.stderr)
        return exit_code(exc)
    except (OSError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
