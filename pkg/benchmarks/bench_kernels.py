"""Time the numba and pure-numpy kernel paths on solver-sized inputs.

    python3 benchmarks/bench_kernels.py [--grid-n 513] [--repeat 5]

The first numba call of each kernel is made before timing so compilation
is excluded.
"""

import argparse
import timeit

import numpy as np

from plasma_peaks import _kernels


def inputs(grid_n, seed):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[-1:1:grid_n * 1j, -1:1:grid_n * 1j]
    # two bumps of opposite sign, like a solved field
    field = 2 * np.exp(-40 * ((x + 0.3) ** 2 + y ** 2)) - 2 * np.exp(-40 * ((x - 0.5) ** 2 + y ** 2))
    h = 2.0 / (grid_n - 1)
    pts = rng.uniform(-0.99, 0.99, size=(20 * grid_n, 2))
    return {
        "bessel_series": (lambda: _kernels.bessel_series(np.linspace(0, 12, grid_n * grid_n // 4), 0)),
        "label_components": (lambda: _kernels.label_components(field > 0.5)),
        "march_segments": (lambda: _kernels.march_segments(field, 1.0)),
        "bilinear": (lambda: _kernels.bilinear(field, -1.0, -1.0, h, pts[:, 0], pts[:, 1])),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid-n", type=int, default=513)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cases = inputs(args.grid_n, args.seed)
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    times = {}
    for backend in backends:
        _kernels.set_backend(backend)
        for name, fn in cases.items():
            fn()  # warm-up (and JIT compilation)
            times[name, backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    _kernels.set_backend("numba" if _kernels.HAVE_NUMBA else "numpy")

    print(f"grid_n = {args.grid_n}, best of {args.repeat}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name in cases:
        t_np = times[name, "numpy"] * 1e3
        if "numba" in backends:
            t_nb = times[name, "numba"] * 1e3
            print(f"{name:<18}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<18}{t_np:>12.3f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
