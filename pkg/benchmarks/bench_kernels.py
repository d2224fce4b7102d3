"""Benchmark the compiled Pareto kernels against the pure NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times non-dominated sorting, crowding distance and exact hypervolume on
population sizes typical of the inner solver (the per-generation sort is
the hot loop of a suggestion step).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from optiloop import _kernels


def time_fn(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = {name: _kernels.get_backend(name) for name in sorted(_kernels.BACKENDS)}
    if "cython" not in backends:
        print("note: compiled extension not built; showing pure backend only")

    rng = np.random.default_rng(0)
    cases = [
        ("sort n=200 m=2", "non_dominated_sort", rng.uniform(size=(200, 2)), None),
        ("sort n=500 m=3", "non_dominated_sort", rng.uniform(size=(500, 3)), None),
        ("sort n=1000 m=3", "non_dominated_sort", rng.uniform(size=(1000, 3)), None),
        ("crowding n=1000 m=3", "crowding_distance", rng.uniform(size=(1000, 3)), None),
        ("hv2d n=1000", "hypervolume_2d", rng.uniform(0, 0.9, size=(1000, 2)), np.ones(2)),
        ("hv3d n=300", "hypervolume_3d", rng.uniform(0, 0.9, size=(300, 3)), np.ones(3)),
    ]

    header = f"{'case':<22}" + "".join(f"{name:>12}" for name in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, attr, points, ref in cases:
        times = {}
        for name, impl in backends.items():
            fn = getattr(impl, attr)
            fn_args = (points,) if ref is None else (points, ref)
            times[name] = time_fn(fn, *fn_args, repeats=args.repeats)
        row = f"{label:<22}" + "".join(
            f"{times[name] * 1e3:>10.2f}ms" for name in backends
        )
        if "cython" in times and "pure" in times:
            row += f"{times['pure'] / times['cython']:>9.1f}x"
        print(row)

    # agreement spot check
    pts = rng.uniform(size=(100, 3))
    results = {
        name: impl.non_dominated_sort(pts) for name, impl in backends.items()
    }
    fronts = [[list(f) for f in r] for r in results.values()]
    assert all(f == fronts[0] for f in fronts), "backends disagree!"
    print("\nbackends agree on a 100x3 spot check; active:", _kernels.ACTIVE_BACKEND)


if __name__ == "__main__":
    main()
