import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# --- shared fixtures on the default 300 x 200 raster ---------------------------

@pytest.fixture(scope="session")
def grid():
    from spatialplan import RasterGrid, RectDomain
    return RasterGrid(RectDomain())


@pytest.fixture(scope="session")
def d2():
    from spatialplan import DensityField, RectDomain
    return DensityField.builtin("x_plus_y", RectDomain())


@pytest.fixture(scope="session")
def t2m(grid, d2):
    """6 x 5 lattice mapped (x first) into the x + y density."""
    from spatialplan import MappingSpec, voronoi
    from spatialplan.geometry import rect_lattice
    spec = MappingSpec(grid.domain, d2, "marginal_x_first")
    return voronoi(spec.map_points(rect_lattice(grid.domain, 6, 5)), grid)


@pytest.fixture(scope="session")
def t2c_plan(grid, d2):
    """Planner run from 30 random sites (seed 0) under the x + y density; ``(result, seconds)``."""
    import time
    from spatialplan import PlannerParams, plan
    from spatialplan.planner import random_sites
    t0 = time.perf_counter()
    res = plan(random_sites(grid, 30, 0), d2, grid, PlannerParams(max_outer_iterations=400))
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def optimized(t2m, t2c_plan, d2):
    """``{name: (topology, PowerOptResult, seconds)}`` for both x + y topologies."""
    import time
    from spatialplan import RadioParams, optimize_power
    out = {}
    for name, topo in (("T2m", t2m), ("T2c", t2c_plan[0].topology)):
        t0 = time.perf_counter()
        res = optimize_power(topo, d2, RadioParams())
        out[name] = (topo, res, time.perf_counter() - t0)
    return out
