"""Scenario files: INI-style sections of ``key = value`` pairs.

Grammar (all sections and keys optional; unknown ones are rejected)::

    [domain]      x_min x_max y_min y_max nx ny metric
    [density]     kind (uniform | x_exp_negy | x_plus_y | raster), path
    [radio]       volume bandwidth rate_min exponent d_min sir_cap
    [dimension]   target_load max_cells cell_resolution num_cells
    [mapping]     mode (separable | marginal_x_first | marginal_y_first)
    [planner]     N delta kappa period epsilon max_outer_iterations fixed_sites
    [powopt]      var_tol max_outer p_min_ratio sweep
    [run]         method (mapping | cvt) seed output_dir

Comments start with ``#`` or ``;``.  A raster ``path`` is resolved relative
to the scenario file.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .demand import BUILTINS, DensityField, read_raster
from .geometry import RasterGrid, RectDomain
from .loadmodel import RadioParams
from .mapping import MODES
from .planner import PlannerParams
from .powopt import PowerOptOptions

OUTPUT_ENV = "SPATIALPLAN_OUTPUT_DIR"

_SCHEMA = {
    "domain": {"x_min": float, "x_max": float, "y_min": float, "y_max": float,
               "nx": int, "ny": int, "metric": str},
    "density": {"kind": str, "path": str},
    "radio": {"volume": float, "bandwidth": float, "rate_min": float, "exponent": float,
              "d_min": float, "sir_cap": float},
    "dimension": {"target_load": float, "max_cells": int, "cell_resolution": int, "num_cells": int},
    "mapping": {"mode": str},
    "planner": {"N": int, "delta": float, "kappa": float, "period": int, "epsilon": float,
                "max_outer_iterations": int, "fixed_sites": bool},
    "powopt": {"var_tol": float, "max_outer": int, "p_min_ratio": float, "sweep": str},
    "run": {"method": str, "seed": int, "output_dir": str},
}


class ScenarioError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"not a boolean: {text!r}")


@dataclass
class Scenario:
    domain: RectDomain = field(default_factory=RectDomain)
    nx: int = 300
    ny: int = 200
    metric: str = "euclidean"
    density_kind: str = "x_plus_y"
    density_path: Path | None = None
    radio: RadioParams = field(default_factory=RadioParams)
    target_load: float = 0.9
    max_cells: int = 200
    cell_resolution: int = 40
    num_cells: int | None = None
    mapping_mode: str = "marginal_x_first"
    planner: PlannerParams = field(default_factory=PlannerParams)
    powopt: PowerOptOptions = field(default_factory=PowerOptOptions)
    method: str = "mapping"
    seed: int = 0
    output_dir: Path | None = None
    source: Path | None = None

    def __post_init__(self):
        if self.metric not in ("euclidean", "torus"):
            raise ScenarioError(f"metric must be euclidean or torus, not {self.metric!r}")
        if self.density_kind not in BUILTINS + ("raster",):
            raise ScenarioError(f"unknown density kind {self.density_kind!r}")
        if self.density_kind == "raster" and self.density_path is None:
            raise ScenarioError("raster density needs a path")
        if self.mapping_mode not in MODES:
            raise ScenarioError(f"unknown mapping mode {self.mapping_mode!r}")
        if self.method not in ("mapping", "cvt"):
            raise ScenarioError(f"method must be mapping or cvt, not {self.method!r}")
        if self.method == "cvt" and self.metric != "euclidean":
            raise ScenarioError("method cvt plans on the euclidean metric only")
        if not self.target_load > 0:
            raise ScenarioError("target_load must be positive")
        if self.num_cells is not None and self.num_cells < 1:
            raise ScenarioError("num_cells must be >= 1")
        if self.max_cells < 1 or self.cell_resolution < 2:
            raise ScenarioError("max_cells must be >= 1 and cell_resolution >= 2")
        RasterGrid(self.domain, self.nx, self.ny)

    @property
    def grid(self) -> RasterGrid:
        return RasterGrid(self.domain, self.nx, self.ny)

    def density(self) -> DensityField:
        if self.density_kind == "raster":
            field_ = read_raster(self.density_path)
            if field_.domain != self.domain:
                raise ScenarioError(f"raster domain {field_.domain} differs from scenario domain {self.domain}")
            return field_
        return DensityField.builtin(self.density_kind, self.domain)

    def resolve_output(self, override=None) -> Path:
        if override is not None:
            return Path(override)
        if self.output_dir is not None:
            return self.output_dir
        return Path(os.environ.get(OUTPUT_ENV, "out"))


def parse_scenario(text: str, base: Path | None = None) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    raw = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ScenarioError(f"unknown section [{section}]")
        kinds = _SCHEMA[section]
        for key, value in cp.items(section):
            if key not in kinds:
                raise ScenarioError(f"unknown key {key!r} in [{section}]")
            value = value.strip()
            if value == "":
                continue
            conv = kinds[key]
            try:
                raw[(section, key)] = _parse_bool(value) if conv is bool else conv(value)
            except ValueError as exc:
                raise ScenarioError(f"[{section}] {key}: cannot parse {value!r}") from exc

    def get(section, key, default=None):
        return raw.get((section, key), default)

    try:
        dom = RectDomain(get("domain", "x_min", 0.0), get("domain", "x_max", 6.0),
                         get("domain", "y_min", 0.0), get("domain", "y_max", 4.0))
        radio = RadioParams(**{k: v for (s, k), v in raw.items() if s == "radio"})
        planner = PlannerParams(**{k: v for (s, k), v in raw.items() if s == "planner"},
                                rng_seed=get("run", "seed", 0))
        powopt = PowerOptOptions(**{k: v for (s, k), v in raw.items() if s == "powopt"})
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    path = get("density", "path")
    if path is not None:
        path = Path(path)
        if base is not None and not path.is_absolute():
            path = base / path
    out = get("run", "output_dir")
    if out is not None:
        out = Path(out)
        if base is not None and not out.is_absolute():
            out = base / out
    return Scenario(
        domain=dom,
        nx=get("domain", "nx", 300),
        ny=get("domain", "ny", 200),
        metric=get("domain", "metric", "euclidean"),
        density_kind=get("density", "kind", "x_plus_y"),
        density_path=path,
        radio=radio,
        target_load=get("dimension", "target_load", 0.9),
        max_cells=get("dimension", "max_cells", 200),
        cell_resolution=get("dimension", "cell_resolution", 40),
        num_cells=get("dimension", "num_cells"),
        mapping_mode=get("mapping", "mode", "marginal_x_first"),
        planner=planner,
        powopt=powopt,
        method=get("run", "method", "mapping"),
        seed=get("run", "seed", 0),
        output_dir=out,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    sc = parse_scenario(path.read_text(), base=path.parent)
    sc.source = path
    return sc
