"""Compare the numba and numpy knapsack kernels on random instances.

    python3 benchmarks/bench_dp.py --items 50 --capacity 10000 --max-freq 10 --repeat 5
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from toolbudget import _kernels


def make_instance(rng: np.random.Generator, n: int, capacity: int, max_freq: int, integer_values: bool):
    costs = rng.integers(1, max(2, capacity // 20), n).astype(np.int64)
    maxf = np.full(n, max_freq, dtype=np.int64)
    if integer_values:
        values = rng.integers(0, 10**6, n).astype(np.int64)
    else:
        values = rng.random(n)
    return costs, values, maxf


def timed(fn, args, repeat: int) -> list[float]:
    out = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        out.append(time.perf_counter() - start)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--items", type=int, default=50)
    ap.add_argument("--capacity", type=int, default=10_000)
    ap.add_argument("--max-freq", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--float-values", action="store_true", help="use float64 values instead of exact integers")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    inst = make_instance(rng, args.items, args.capacity, args.max_freq, not args.float_values)
    call = (*inst, args.capacity)
    kernels = {"numpy": _kernels.bounded_knapsack_numpy}
    if _kernels.HAVE_NUMBA:
        _kernels.bounded_knapsack_numba(*call)  # compile (or load from cache) before timing
        kernels["numba"] = _kernels.bounded_knapsack_numba
    else:
        print("numba not installed; timing the numpy kernel only")

    results = {}
    for name, fn in kernels.items():
        results[name] = fn(*call)
        ts = timed(fn, call, args.repeat)
        print(f"{name:<6} n={args.items} R={args.capacity} F={args.max_freq} "
              f"median {statistics.median(ts) * 1e3:8.2f} ms  min {min(ts) * 1e3:8.2f} ms")
    if len(results) == 2:
        same = np.array_equal(results["numpy"][0], results["numba"][0])
        print(f"choice tables identical: {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
