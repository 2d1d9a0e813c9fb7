"""Demand-compatible cellular topology planning and load-coupled power optimization."""
from .geometry import RasterGrid, RectDomain, Topology, assign_power_voronoi, mass_centroids, voronoi
from .demand import DensityField, cov, demand_share
from .mapping import MappingSpec, invert_1d, map_topology
from .loadmodel import RadioParams, cell_loads, dimension, gain_matrix, solve_nlce
from .planner import PlannerParams, cva, plan
from .powopt import PowerOptOptions, optimize_power

__version__ = "0.1.0"
