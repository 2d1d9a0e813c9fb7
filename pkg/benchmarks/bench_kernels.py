"""Compare the compiled and pure-NumPy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--cells 30]

Times each hot kernel on the default 300 x 200 raster with both backends,
checks that they agree, and prints a table of best-of-``repeat`` timings.
"""
import argparse
import time

import numpy as np

from spatialplan.geometry import RasterGrid, RectDomain, lattice_shape, rect_lattice
from spatialplan.kernels import available_backends


def best_of(func, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--cells", type=int, default=30)
    args = parser.parse_args(argv)

    grid = RasterGrid(RectDomain())
    pts = grid.centers()
    cols, rows = lattice_shape(args.cells, grid.domain)
    sites = rect_lattice(grid.domain, cols, rows)
    rng = np.random.default_rng(0)
    weights = rng.uniform(-0.2, 0.0, len(sites))
    mass = np.full(grid.size, 1.0 / grid.size)
    d = np.hypot(sites[:, 0, None] - pts[None, :, 0], sites[:, 1, None] - pts[None, :, 1])
    gain = np.maximum(d, grid.half_diagonal()) ** -3.0
    power = rng.uniform(0.1, 1.0, len(sites))
    alpha = rng.uniform(0.3, 0.9, len(sites))

    backends = available_backends()
    results = {}
    for name, mod in backends.items():
        labels = mod.assign(pts, sites, weights)
        sig, inter = mod.sir_field(labels, gain, power, alpha)
        cases = {
            "assign": lambda: mod.assign(pts, sites, weights),
            "assign (torus)": lambda: mod.assign(pts, sites, weights, (grid.domain.width, grid.domain.height)),
            "cell_moments": lambda: mod.cell_moments(labels, mass, pts, len(sites)),
            "sir_field": lambda: mod.sir_field(labels, gain, power, alpha),
            "load_sums": lambda: mod.load_sums(labels, mass, sig, inter, len(sites), 1e6),
        }
        results[name] = {k: best_of(f, args.repeat) for k, f in cases.items()}

    names = sorted(results, key=lambda n: n != "compiled")   # compiled first
    print(f"raster {grid.nx} x {grid.ny}, {len(sites)} cells, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{n:>14}" for n in names) + ("  python/compiled  agree" if len(names) == 2 else ""))
    for kernel in results[names[0]]:
        times = [results[n][kernel][0] for n in names]
        line = f"{kernel:<16}" + "".join(f"{t * 1e3:>12.2f}ms" for t in times)
        if len(names) == 2:
            a, b = (results[n][kernel][1] for n in names)
            a, b = (x if isinstance(x, tuple) else (x,) for x in (a, b))
            agree = all(np.allclose(u, v, rtol=1e-12, atol=0) for u, v in zip(a, b))
            line += f"{times[1] / times[0]:>16.1f}x  {agree}"
        print(line)


if __name__ == "__main__":
    main()
