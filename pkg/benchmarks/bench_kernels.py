"""Compare the compiled and pure-Python spectral-sum kernels.

    python benchmarks/bench_kernels.py [--points 200000] [--grid 64] [--repeat 3]

Prints one line per kernel and backend with the best wall time, and the
maximum absolute difference between the backends.
"""
import argparse
import time

import numpy as np

from isotrace import kernels
from isotrace.trace import GaussianWindow


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    lam = np.sort(rng.uniform(1000, 1300, args.points))
    x = np.linspace(1050, 1250, args.grid)
    w = GaussianWindow()
    s_cut = w.cutoff()
    t = np.linspace(2 * np.pi - 1, 2 * np.pi + 1, args.grid)
    lam_small = lam[: max(1, args.points // 10)]

    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"points={args.points} grid={args.grid} active backend={kernels.BACKEND}")
    results = {}
    for name, call in (
        ("windowed_sum", lambda b: kernels.windowed_sum(x, lam, None, 1.0, w.width, s_cut, backend=b)),
        ("exp_sum", lambda b: kernels.exp_sum(t, lam_small, None, backend=b)),
    ):
        for b in backends:
            sec, out = best_time(lambda: call(b), args.repeat)
            results[(name, b)] = out
            print(f"{name:13s} {b:7s} {sec * 1e3:10.2f} ms")
        if len(backends) == 2:
            diff = np.max(np.abs(results[(name, "python")] - results[(name, "cython")]))
            print(f"{name:13s} max |python - cython| = {diff:.2e}")
    if len(backends) == 1:
        print("compiled kernels not built; only the python backend was timed")


if __name__ == "__main__":
    main()
