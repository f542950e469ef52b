"""Summation backends.

The single per-record pass in the package computes the seven weighted sums
(w, wy, ws, w^2, wy^2, ws^2, wys) over a dataset.  It is the hot inner loop
of the simulation harness, so the default backend is a numba-compiled
one-pass Kahan accumulation.  Setting ``DPRATIO_DISABLE_NUMBA=1`` (or running
without numba installed) selects a pure-numpy path built on ``math.fsum``.

Both backends are order-independent: fsum returns the exactly rounded sum,
and the compensated accumulation keeps permutation effects far below 1e-12
relative.  ``benchmarks/bench_backends.py`` compares the two.
"""

import math
import os

import numpy as np


def weighted_sums_numpy(y: np.ndarray, s: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Exactly rounded sums of the seven summand columns via math.fsum."""
    cols = (w, w * y, w * s, w * w, w * y * y, w * s * s, w * y * s)
    return np.array([math.fsum(col) for col in cols])


def _env_disables_numba() -> bool:
    return os.environ.get("DPRATIO_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}


weighted_sums_numba = None
if not _env_disables_numba():
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None
    if numba is not None:

        @numba.njit(cache=True)
        def weighted_sums_numba(y, s, w):
            acc = np.zeros(7)
            comp = np.zeros(7)
            term = np.empty(7)
            for i in range(y.shape[0]):
                wi = w[i]
                yi = y[i]
                si = s[i]
                term[0] = wi
                term[1] = wi * yi
                term[2] = wi * si
                term[3] = wi * wi
                term[4] = wi * yi * yi
                term[5] = wi * si * si
                term[6] = wi * yi * si
                for j in range(7):
                    # Kahan update; requires strict IEEE ordering (no fastmath).
                    t = term[j] - comp[j]
                    tot = acc[j] + t
                    comp[j] = (tot - acc[j]) - t
                    acc[j] = tot
            return acc


if weighted_sums_numba is not None:
    BACKEND = "numba"
    weighted_sums = weighted_sums_numba
else:
    BACKEND = "numpy"
    weighted_sums = weighted_sums_numpy
