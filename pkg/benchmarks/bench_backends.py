#!/usr/bin/env python3
"""Compare the numba and pure-numpy summation backends.

Times the seven-sum kernel across dataset sizes, then a small simulation
cell end to end.  When the numba backend is active, the end-to-end fallback
number comes from re-running this script in a subprocess with
``DPRATIO_DISABLE_NUMBA=1``.

Usage:
    python benchmarks/bench_backends.py
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from dpratio import _kernels
from dpratio.simulation import SimulationConfig, run_experiment

SIZES = (1_000, 5_000, 20_000, 100_000)
CELL = dict(n=5000, epsilons=(0.5, 1.0), replications=200, master_seed=0)


def median_ms(fn, args, repeats=25):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        samples.append((time.perf_counter() - start) * 1e3)
    return float(np.median(samples))


def bench_kernel():
    rng = np.random.default_rng(0)
    print(f"seven-sum kernel, median of 25 runs (active backend: {_kernels.BACKEND})")
    header = f"{'n':>9}  {'numpy/fsum ms':>14}"
    if _kernels.weighted_sums_numba is not None:
        header += f"  {'numba ms':>10}  {'speedup':>8}"
    print(header)
    for n in SIZES:
        y, s = rng.random(n), rng.random(n)
        w = rng.uniform(0.5, 2.0, n)
        numpy_ms = median_ms(_kernels.weighted_sums_numpy, (y, s, w))
        line = f"{n:>9}  {numpy_ms:>14.3f}"
        if _kernels.weighted_sums_numba is not None:
            _kernels.weighted_sums_numba(y, s, w)  # warm the JIT
            numba_ms = median_ms(_kernels.weighted_sums_numba, (y, s, w))
            line += f"  {numba_ms:>10.4f}  {numpy_ms / numba_ms:>7.1f}x"
        print(line)


def bench_cell():
    config = SimulationConfig(**CELL)
    run_experiment(SimulationConfig(**{**CELL, "replications": 2}))  # warm up
    start = time.perf_counter()
    run_experiment(config)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cell-only", action="store_true",
                        help="print only the end-to-end cell seconds (used internally)")
    args = parser.parse_args()

    if args.cell_only:
        print(f"{bench_cell():.3f}")
        return

    bench_kernel()
    print()
    seconds = bench_cell()
    print(f"end-to-end cell ({CELL['replications']} replications, n={CELL['n']}, "
          f"{len(CELL['epsilons'])} epsilons): {seconds:.2f} s [{_kernels.BACKEND}]")

    if _kernels.BACKEND == "numba":
        env = dict(os.environ, DPRATIO_DISABLE_NUMBA="1")
        out = subprocess.run(
            [sys.executable, __file__, "--cell-only"],
            env=env, capture_output=True, text=True, check=True,
        )
        fallback = float(out.stdout.strip())
        print(f"end-to-end cell (same settings): {fallback:.2f} s [numpy fallback]")


if __name__ == "__main__":
    main()
