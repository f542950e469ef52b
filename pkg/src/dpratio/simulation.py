"""Replicated synthetic-data experiments.

Generates calibration-style datasets (Beta scores, Bernoulli labels, and
optionally clipped-Exponential weights), runs the public baseline and the
three DP interval methods across a grid of privacy budgets, and aggregates
width, coverage, and interval score over replications.

Every replication derives its own random substreams from
(master_seed, replication index, purpose, epsilon), so results are
bit-reproducible regardless of worker count or execution order, and adding
epsilon values never perturbs existing streams.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Bounds, Record, compute_sums_from_arrays, kish_effective_n
from .errors import (
    DegenerateDenominatorError,
    DegenerateNumeratorError,
    InvalidConfigError,
    InvalidIntervalError,
)
from .inference import (
    Method,
    RatioEstimate,
    Scale,
    ci_analytical,
    ci_monte_carlo,
    ci_no_correction,
    public_estimate,
)
from .mechanisms import MechanismKind, PrivacyBudget, release

#: Clipping range of the Exponential(1) weights in the weighted design.
WEIGHT_CLIP = (1.0 / 3.0, 3.0)

_DP_METHODS = (Method.NO_CORRECTION, Method.MONTE_CARLO, Method.ANALYTICAL)

# Purpose tags for substream derivation.
_PURPOSE_DATA = 0
_PURPOSE_RELEASE = 1
_PURPOSE_MC = 2

_DEGENERATE = (DegenerateDenominatorError, DegenerateNumeratorError)


@dataclass(frozen=True)
class SimulationConfig:
    """One experiment cell: a (weighted, n, mechanism, scale) setting."""

    n: int
    epsilons: tuple[float, ...] = (0.2, 0.5, 1.0, 4.0)
    delta: float = 1e-6
    weighted: bool = False
    mechanism: MechanismKind = MechanismKind.GAUSSIAN
    scale: Scale = Scale.RATIO
    true_ratio: float = 1.1
    replications: int = 1000
    mc_draws: int = 200
    level: float = 0.95
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise InvalidConfigError(f"n must be at least 2, got {self.n}")
        if self.replications < 1:
            raise InvalidConfigError(f"replications must be at least 1, got {self.replications}")
        if self.mc_draws < 2:
            raise InvalidConfigError(f"mc_draws must be at least 2, got {self.mc_draws}")
        if not self.epsilons:
            raise InvalidConfigError("epsilons must be non-empty")
        if any(not (math.isfinite(e) and e > 0.0) for e in self.epsilons):
            raise InvalidConfigError(f"epsilons must be positive and finite, got {self.epsilons}")
        if not 0.0 < self.level < 1.0:
            raise InvalidConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.true_ratio < 1.0:
            raise InvalidConfigError(
                f"true_ratio must be at least the score upper bound 1, got {self.true_ratio}"
            )
        if self.mechanism is MechanismKind.GAUSSIAN and not self.delta > 0.0:
            raise InvalidConfigError("the Gaussian mechanism requires delta > 0")
        if self.mechanism is MechanismKind.LAPLACE and self.delta != 0.0:
            raise InvalidConfigError("the Laplace mechanism requires delta == 0")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidConfigError("master_seed must be a 64-bit unsigned integer")

    @property
    def bounds(self) -> Bounds:
        if self.weighted:
            return Bounds.binary(w_low=WEIGHT_CLIP[0], w_high=WEIGHT_CLIP[1])
        return Bounds.binary_unweighted()

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilons": list(self.epsilons),
            "delta": self.delta,
            "weighted": self.weighted,
            "mechanism": self.mechanism.value,
            "scale": self.scale.value,
            "true_ratio": self.true_ratio,
            "replications": self.replications,
            "mc_draws": self.mc_draws,
            "level": self.level,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class ExperimentRow:
    """Aggregate metrics for one (method, epsilon) cell."""

    method: Method
    epsilon: float | None
    mean_width: float
    coverage: float
    mean_interval_score: float
    mean_effective_n: float
    refusal_count: int

    def to_json_dict(self) -> dict:
        def _clean(x: float) -> float | None:
            return None if math.isnan(x) else x

        return {
            "method": self.method.value,
            "epsilon": self.epsilon,
            "width": _clean(self.mean_width),
            "coverage": _clean(self.coverage),
            "score": _clean(self.mean_interval_score),
            "effective_n": _clean(self.mean_effective_n),
            "refusals": self.refusal_count,
        }


def generate_arrays(
    n: int, weighted: bool, true_ratio: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw one synthetic dataset as (y, s, w) arrays.

    Scores are Beta(2, 2), labels Bernoulli(s / true_ratio), and weights
    either all ones or Exponential(1) clipped to ``WEIGHT_CLIP``.  Draw
    order is fixed (scores, labels, weights) so streams are stable.
    """
    if n < 1:
        raise InvalidConfigError(f"n must be at least 1, got {n}")
    if true_ratio < 1.0:
        raise InvalidConfigError(
            f"true_ratio must be at least the score upper bound 1, got {true_ratio}"
        )
    s = rng.beta(2.0, 2.0, n)
    y = (rng.random(n) < s / true_ratio).astype(np.float64)
    if weighted:
        w = np.clip(rng.standard_exponential(n), WEIGHT_CLIP[0], WEIGHT_CLIP[1])
    else:
        w = np.ones(n)
    return y, s, w


def generate_dataset(
    n: int, weighted: bool, true_ratio: float, rng: np.random.Generator
) -> list[Record]:
    """Like :func:`generate_arrays` but materialized as records."""
    y, s, w = generate_arrays(n, weighted, true_ratio, rng)
    return [Record(float(yi), float(si), float(wi)) for yi, si, wi in zip(y, s, w)]


def interval_score(lower: float, upper: float, truth: float, alpha: float) -> float:
    """Interval score: width plus 2/alpha-scaled penalty for a missed truth.

    The penalty applies only when the truth lies strictly outside the
    interval, so a truth exactly on an endpoint scores as covered.
    """
    if lower > upper:
        raise InvalidIntervalError(f"lower {lower} exceeds upper {upper}")
    if not 0.0 < alpha < 1.0:
        raise InvalidConfigError(f"alpha must lie in (0, 1), got {alpha}")
    score = upper - lower
    if truth < lower:
        score += 2.0 / alpha * (lower - truth)
    elif truth > upper:
        score += 2.0 / alpha * (truth - upper)
    return score


def _substream(
    master_seed: int, replication: int, purpose: int, epsilon: float | None = None
) -> np.random.Generator:
    key: list[int] = [replication, purpose]
    if epsilon is not None:
        # Key on the bit pattern of the value so editing the epsilon list
        # never shifts the streams of the remaining epsilons.
        key.append(int(np.float64(epsilon).view(np.uint64)))
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.default_rng(seq)


def _metrics(estimate: RatioEstimate, truth: float, alpha: float) -> tuple[float, float, float]:
    covered = float(estimate.ci_lower <= truth <= estimate.ci_upper)
    return estimate.width, covered, interval_score(estimate.ci_lower, estimate.ci_upper, truth, alpha)


def _run_replication(config: SimulationConfig, replication: int) -> tuple[float, np.ndarray]:
    """One replication: returns (effective n, per-cell metric matrix).

    The matrix has one row per cell (public first, then epsilon-major by
    method) and columns (width, covered, score); refused cells stay NaN.
    """
    rng = _substream(config.master_seed, replication, _PURPOSE_DATA)
    y, s, w = generate_arrays(config.n, config.weighted, config.true_ratio, rng)
    bounds = config.bounds
    sums = compute_sums_from_arrays(y, s, w, bounds)
    effective_n = kish_effective_n(sums)

    truth = math.log(config.true_ratio) if config.scale is Scale.LOG else config.true_ratio
    alpha = 1.0 - config.level
    cells = np.full((1 + 3 * len(config.epsilons), 3), np.nan)

    try:
        cells[0] = _metrics(public_estimate(sums, config.scale, config.level), truth, alpha)
    except _DEGENERATE:
        pass

    for i, eps in enumerate(config.epsilons):
        budget = PrivacyBudget(eps, config.delta)
        released = release(
            sums, bounds, budget, config.mechanism, _substream(config.master_seed, replication, _PURPOSE_RELEASE, eps)
        )
        base = 1 + 3 * i
        try:
            cells[base] = _metrics(ci_no_correction(released, config.scale, config.level), truth, alpha)
        except _DEGENERATE:
            pass
        try:
            mc_rng = _substream(config.master_seed, replication, _PURPOSE_MC, eps)
            estimate = ci_monte_carlo(released, config.scale, config.level, config.mc_draws, mc_rng)
            cells[base + 1] = _metrics(estimate, truth, alpha)
        except _DEGENERATE:
            pass
        try:
            cells[base + 2] = _metrics(ci_analytical(released, config.scale, config.level), truth, alpha)
        except _DEGENERATE:
            pass

    return effective_n, cells


def run_experiment(config: SimulationConfig, threads: int = 1) -> list[ExperimentRow]:
    """Run all replications of one cell and aggregate per (method, epsilon).

    Returns the public row first (epsilon-independent), then one row per
    (epsilon, method).  Degenerate replications are excluded from the means
    and surfaced through ``refusal_count``.  Output is a pure function of
    (config, master_seed): metric matrices are indexed by replication, so
    the aggregation order never depends on ``threads``.
    """
    reps = config.replications
    n_cells = 1 + 3 * len(config.epsilons)
    metrics = np.empty((reps, n_cells, 3))
    effective = np.empty(reps)

    if threads <= 1 or reps == 1:
        for r in range(reps):
            effective[r], metrics[r] = _run_replication(config, r)
    else:
        chunksize = max(1, reps // (8 * threads))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = pool.map(partial(_run_replication, config), range(reps), chunksize=chunksize)
            for r, (eff, cells) in enumerate(results):
                effective[r] = eff
                metrics[r] = cells

    mean_effective = float(effective.mean())

    def _aggregate(cell: int, method: Method, epsilon: float | None) -> ExperimentRow:
        block = metrics[:, cell, :]
        valid = ~np.isnan(block[:, 0])
        count = int(valid.sum())
        if count == 0:
            width = coverage = score = math.nan
        else:
            width = float(block[valid, 0].mean())
            coverage = float(block[valid, 1].mean())
            score = float(block[valid, 2].mean())
        return ExperimentRow(
            method=method,
            epsilon=epsilon,
            mean_width=width,
            coverage=coverage,
            mean_interval_score=score,
            mean_effective_n=mean_effective,
            refusal_count=reps - count,
        )

    rows = [_aggregate(0, Method.PUBLIC, None)]
    for i, eps in enumerate(config.epsilons):
        for j, method in enumerate(_DP_METHODS):
            rows.append(_aggregate(1 + 3 * i + j, method, eps))
    return rows


def write_rows_csv(rows: Sequence[ExperimentRow], path: str | Path) -> None:
    """Write aggregate rows as CSV (full float precision, byte-stable)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "epsilon", "width", "coverage", "score", "effective_n", "refusals"])
        for row in rows:
            writer.writerow(
                [
                    row.method.value,
                    "" if row.epsilon is None else repr(float(row.epsilon)),
                    repr(float(row.mean_width)),
                    repr(float(row.coverage)),
                    repr(float(row.mean_interval_score)),
                    repr(float(row.mean_effective_n)),
                    row.refusal_count,
                ]
            )
