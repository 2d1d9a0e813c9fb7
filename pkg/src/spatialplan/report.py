"""CSV tables, SVG renderings and the run summary.

SVGs are written by hand (rectangles and circles) so output bytes depend
only on the numbers being drawn.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demand import DemandShare, write_shares_csv
from .geometry import Topology, write_assignment_grid, write_topology_csv
from .loadmodel import DimensionResult
from .planner import write_log_csv
from .powopt import PowerOptResult, write_powers_csv

# 2 dB bins from the strongest cell down to -16 dB
DB_BINS = np.arange(0, -18, -2)
_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
_DB_COLORS = ["#08306b", "#08519c", "#2171b5", "#4292c6", "#6baed6",
              "#9ecae1", "#c6dbef", "#deebf7", "#f7fbff"]


@dataclass
class Artifacts:
    """Everything a run can produce; unset entries are simply skipped."""

    dimension: DimensionResult | None = None
    lattice: np.ndarray | None = None
    topology: Topology | None = None
    shares: DemandShare | None = None
    plan_log: list | None = None
    loads_uniform: np.ndarray | None = None
    loads_uniform_diverged: bool = False
    power: PowerOptResult | None = None
    summary: dict = field(default_factory=dict)


def _num(x) -> str:
    return repr(float(x))


def write_loads_csv(path, loads) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_index", "load", "outage"])
        for idx, v in enumerate(np.asarray(loads, dtype=float), start=1):
            w.writerow([idx, _num(v), int(not v <= 1.0)])


def write_dimension_csv(path, result: DimensionResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "cols", "rows", "uniform_load"])
        for n, c, r, load in result.table:
            w.writerow([n, c, r, _num(load)])


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_load", "var_load", "max_load", "min_load"])
        for it, mean, var, mx, mn in history:
            w.writerow([it, _num(mean), _num(var), _num(mx), _num(mn)])


def write_summary_csv(path, summary: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "value"])
        for key, value in summary.items():
            w.writerow([key, _num(value) if isinstance(value, (float, np.floating)) else value])


# --- SVG -------------------------------------------------------------------

def _svg(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")


def _cell_runs(topology: Topology):
    """Row runs ``(row, col_start, col_end, label)`` of the assignment raster."""
    g = topology.grid
    lab = topology.assignment.reshape(g.ny, g.nx)
    for j in range(g.ny):
        row = lab[j]
        cuts = np.flatnonzero(np.diff(row)) + 1
        starts = np.concatenate([[0], cuts])
        ends = np.concatenate([cuts, [g.nx]])
        for s, e in zip(starts, ends):
            yield j, int(s), int(e), int(row[s])


def render_cells(topology: Topology, colors, scale: float = 80.0, legend=None) -> str:
    """Raster cells filled by ``colors[label]`` with sites as dots."""
    g = topology.grid
    d = g.domain
    sx = scale * g.dx
    sy = scale * g.dy
    width = scale * d.width
    height = scale * d.height
    extra = 130 if legend else 0
    body = []
    for j, s, e, lab in _cell_runs(topology):
        y = height - (j + 1) * sy
        body.append(f'<rect x="{s * sx:.2f}" y="{y:.2f}" width="{(e - s) * sx:.2f}" '
                    f'height="{sy:.2f}" fill="{colors[lab]}" stroke="none"/>')
    for k, (x, y) in enumerate(topology.sites):
        cx = scale * (x - d.x_min)
        cy = height - scale * (y - d.y_min)
        body.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="black"><title>site {k + 1}</title></circle>')
    if legend:
        for i, (label, color) in enumerate(legend):
            y0 = 10 + 22 * i
            body.append(f'<rect x="{width + 10:.2f}" y="{y0}" width="18" height="18" fill="{color}" stroke="black"/>')
            body.append(f'<text x="{width + 34:.2f}" y="{y0 + 14}" font-size="12">{label}</text>')
    return _svg(f"{width + extra:.0f}", f"{height:.0f}", body)


def render_topology(topology: Topology) -> str:
    colors = [_PALETTE[k % len(_PALETTE)] for k in range(topology.L)]
    return render_cells(topology, colors)


def db_bin_index(p_db) -> np.ndarray:
    """Index into ``DB_BINS`` for each dB value (clipped to the -16 dB floor)."""
    p_db = np.asarray(p_db, dtype=float)
    idx = np.floor(-p_db / 2.0).astype(int)
    return np.clip(idx, 0, len(DB_BINS) - 1)


def power_legend():
    return [(f"{int(b)} dB", c) for b, c in zip(DB_BINS, _DB_COLORS)]


def render_power_map(topology: Topology, p_star) -> str:
    p_db = 10.0 * np.log10(np.asarray(p_star, dtype=float) / np.max(p_star))
    colors = [_DB_COLORS[i] for i in db_bin_index(p_db)]
    return render_cells(topology, colors, legend=power_legend())


def render_bars(series: dict, title: str, reference: float | None = None) -> str:
    """Grouped bar chart of per-cell values; optional horizontal reference line."""
    names = list(series)
    n = max(len(v) for v in series.values())
    top = max(max(np.max(v) for v in series.values()), reference or 0.0, 1e-12) * 1.1
    width, height, margin = 40 + 18 * n, 260, 30
    bw = 14.0 / len(names)
    body = [f'<text x="10" y="16" font-size="13">{title}</text>']
    for k, name in enumerate(names):
        color = _PALETTE[k % len(_PALETTE)]
        for i, v in enumerate(series[name]):
            h = (height - 2 * margin) * float(v) / top
            x = 30 + 18 * i + k * bw
            body.append(f'<rect x="{x:.2f}" y="{height - margin - h:.2f}" width="{bw:.2f}" '
                        f'height="{h:.2f}" fill="{color}"><title>{name} {i + 1}: {float(v):.4g}</title></rect>')
        body.append(f'<text x="{30 + 120 * k}" y="{height - 8}" font-size="11" fill="{color}">{name}</text>')
    if reference is not None:
        y = height - margin - (height - 2 * margin) * reference / top
        body.append(f'<line x1="30" x2="{width - 10}" y1="{y:.2f}" y2="{y:.2f}" stroke="red" stroke-dasharray="4"/>')
    return _svg(width, height, body)


# --- emission ----------------------------------------------------------------

def emit_report(artifacts: Artifacts, outdir) -> list[Path]:
    """Write every available artifact into ``outdir``; returns written paths.

    ``report.csv`` (key/value summary) is always written, header-only when
    nothing else is known.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, writer, *args):
        path = out / name
        writer(path, *args)
        written.append(path)

    def put_text(name, text):
        path = out / name
        path.write_text(text)
        written.append(path)

    a = artifacts
    if a.dimension is not None:
        put("dimension.csv", write_dimension_csv, a.dimension)
    if a.lattice is not None:
        put("lattice.csv", write_topology_csv, a.lattice)
    if a.topology is not None:
        put("topology.csv", write_topology_csv, a.topology.sites, a.topology.weights)
        put("assignment.grid", write_assignment_grid, a.topology)
        put_text("topology.svg", render_topology(a.topology))
    if a.shares is not None:
        put("shares.csv", write_shares_csv, a.shares)
        put_text("shares.svg", render_bars({"share": a.shares.fractions}, "Demand share per cell",
                                           reference=1.0 / len(a.shares.shares)))
    if a.plan_log:
        put("convergence.csv", write_log_csv, a.plan_log)
    if a.loads_uniform is not None:
        put("loads_uniform.csv", write_loads_csv, a.loads_uniform)
    if a.power is not None:
        put("powers.csv", write_powers_csv, a.power.p_star)
        put("loads_optimized.csv", write_loads_csv, a.power.alpha)
        put("powopt_history.csv", write_history_csv, a.power.history)
        if a.topology is not None:
            put_text("power_map.svg", render_power_map(a.topology, a.power.p_star))
    if a.loads_uniform is not None or a.power is not None:
        series = {}
        if a.loads_uniform is not None and not a.loads_uniform_diverged:
            series["uniform power"] = a.loads_uniform
        if a.power is not None:
            series["optimized power"] = a.power.alpha
        if series:
            put_text("loads.svg", render_bars(series, "Cell load", reference=1.0))
    put("report.csv", write_summary_csv, a.summary)
    return written
