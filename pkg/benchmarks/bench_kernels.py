"""Time the numba and numpy kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the MESHKIT_DISABLE_NUMBA flag does
not matter here.  Numba timings exclude the first (compiling) call.
"""

import argparse
import timeit

import numpy as np

from meshkit import kernels
from meshkit.grid import make_grid


def cases():
    rng = np.random.default_rng(0)
    g = make_grid("O640")
    nx = g.nx
    j = len(nx) // 2 - 1
    xa = np.append(np.arange(nx[j]) / nx[j], 1.0)
    xb = np.append(np.arange(nx[j + 1]) / nx[j + 1], 1.0)

    nodes, edges, L = 200_000, 600_000, 8
    n0 = rng.integers(0, nodes, edges)
    n1 = rng.integers(0, nodes, edges)
    phi = rng.normal(size=(nodes, L))
    fx, fy = rng.normal(size=(nodes, L)), rng.normal(size=(nodes, L))
    normals = rng.normal(size=(edges, 2))
    x = rng.uniform(-1, 1, 100_000)

    return {
        "legendre_colat_roots(1280)": lambda b: b.legendre_colat_roots(1280),
        "legendre_eval(256, 1e5 pts)": lambda b: b.legendre_eval(256, x),
        "tessellate_strip(O640 equator)": lambda b: b.tessellate_strip(xa, xb, True),
        "accumulate_gradient(6e5 edges, 8 lev)": lambda b: b.accumulate_gradient(
            n0, n1, phi, normals, np.zeros((nodes, L, 2))
        ),
        "accumulate_flux(6e5 edges, 8 lev)": lambda b: b.accumulate_flux(n0, n1, fx, fy, normals, np.zeros((nodes, L))),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"numpy": kernels.numpy_backend}
    if kernels.numba_backend is not None:
        backends["numba"] = kernels.numba_backend
    else:
        print("numba not importable; timing the numpy backend only")

    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name in backends) + "     speedup")
    for label, fn in cases().items():
        times = {}
        for name, b in backends.items():
            fn(b)  # warm up / compile
            times[name] = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
        row = f"{label:40s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in backends)
        if "numba" in times:
            row += f"  {times['numpy'] / times['numba']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
