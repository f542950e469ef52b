"""Command-line interface.

Two subcommands: ``estimate`` privatizes a CSV dataset and reports ratio
estimates with DP-corrected intervals; ``simulate`` runs the replicated
coverage experiments and writes per-cell CSV tables plus a combined JSON
report.  All handled failures exit with status 2 and a machine-readable
error document on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import Bounds, compute_sums_from_arrays, read_dataset_csv
from .errors import DPRatioError, InvalidConfigError, MechanismMismatchError
from .inference import (
    Method,
    Scale,
    ci_analytical,
    ci_monte_carlo,
    ci_no_correction,
    public_estimate,
)
from .mechanisms import MechanismKind, PrivacyBudget, release
from .simulation import ExperimentRow, SimulationConfig, run_experiment, write_rows_csv

_SIM_DEFAULTS = {
    "n": 5000,
    "epsilons": [0.2, 0.5, 1.0, 4.0],
    "delta": None,
    "weighted": False,
    "mechanism": "gaussian",
    "scale": "ratio",
    "true_ratio": 1.1,
    "replications": 1000,
    "mc_draws": 200,
    "level": 0.95,
    "seed": 0,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpratio",
        description="Differentially private ratio estimation and coverage experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="privatize a y,s[,w] CSV and estimate the ratio")
    est.add_argument("--input", required=True, type=Path, help="CSV file with header y,s[,w]")
    est.add_argument("--epsilon", required=True, type=float, help="total privacy budget epsilon")
    est.add_argument("--delta", type=float, default=None,
                     help="total delta (default: 1e-6 for gaussian, 0 for laplace)")
    est.add_argument("--mechanism", choices=["gaussian", "laplace"], default="gaussian")
    est.add_argument("--scale", choices=["ratio", "log", "both"], default="ratio")
    est.add_argument("--level", type=float, default=0.95, help="confidence level")
    est.add_argument("--mc-draws", type=int, default=200, help="Monte Carlo correction draws")
    est.add_argument("--seed", type=int, default=None, help="seed for all noise draws")
    est.add_argument("--binary", action="store_true",
                     help="declare binary labels (y in {0,1}, s in [0,1]); releases fewer sums")
    est.add_argument("--unit-weights", action="store_true",
                     help="declare all weights exactly 1; releases fewer sums when --binary")
    est.add_argument("--y-bounds", nargs=2, type=float, default=[0.0, 1.0], metavar=("LOW", "HIGH"))
    est.add_argument("--s-bounds", nargs=2, type=float, default=[0.0, 1.0], metavar=("LOW", "HIGH"))
    est.add_argument("--w-bounds", nargs=2, type=float, default=[1.0, 1.0], metavar=("LOW", "HIGH"))
    est.add_argument("--include-public", action="store_true",
                     help="also report the non-private baseline (needs --allow-non-dp)")
    est.add_argument("--allow-non-dp", action="store_true",
                     help="acknowledge that --include-public output is not differentially private")

    sim = sub.add_parser("simulate", help="run replicated coverage experiments")
    sim.add_argument("--output-dir", type=Path, default=Path("."), help="directory for CSV/JSON output")
    sim.add_argument("--config", type=Path, default=None,
                     help="JSON file with config fields; explicit flags take precedence")
    sim.add_argument("--n", type=int, default=None, help="sample size per replication")
    sim.add_argument("--epsilon", action="append", type=float, default=None,
                     help="privacy budget; repeat for a grid (default: 0.2 0.5 1.0 4.0)")
    sim.add_argument("--delta", type=float, default=None,
                     help="total delta (default: 1e-6 for gaussian, 0 for laplace)")
    sim.add_argument("--weighted", action=argparse.BooleanOptionalAction, default=None,
                     help="draw clipped-Exponential weights instead of unit weights")
    sim.add_argument("--mechanism", choices=["gaussian", "laplace"], default=None)
    sim.add_argument("--scale", choices=["ratio", "log", "both"], default=None)
    sim.add_argument("--true-ratio", type=float, default=None)
    sim.add_argument("--replications", type=int, default=None)
    sim.add_argument("--mc-draws", type=int, default=None)
    sim.add_argument("--level", type=float, default=None)
    sim.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    sim.add_argument("--threads", type=int, default=None,
                     help="worker processes (default: all cores); results do not depend on it")
    return parser


def _resolve_delta(delta: float | None, mechanism: MechanismKind) -> float:
    if delta is not None:
        return delta
    return 1e-6 if mechanism is MechanismKind.GAUSSIAN else 0.0


def _check_mechanism_budget(mechanism: MechanismKind, budget: PrivacyBudget) -> None:
    # Fail before touching the data, not at release time.
    if mechanism is MechanismKind.GAUSSIAN and budget.delta == 0.0:
        raise MechanismMismatchError("the Gaussian mechanism requires delta > 0")
    if mechanism is MechanismKind.LAPLACE and budget.delta != 0.0:
        raise MechanismMismatchError("the Laplace mechanism requires delta == 0")


def _scales(flag: str) -> list[Scale]:
    if flag == "both":
        return [Scale.RATIO, Scale.LOG]
    return [Scale(flag)]


def _run_estimate(args: argparse.Namespace) -> int:
    mechanism = MechanismKind(args.mechanism)
    budget = PrivacyBudget(args.epsilon, _resolve_delta(args.delta, mechanism))
    _check_mechanism_budget(mechanism, budget)
    if args.include_public and not args.allow_non_dp:
        raise InvalidConfigError("--include-public requires --allow-non-dp")

    if args.binary:
        bounds = Bounds.binary(args.w_bounds[0], args.w_bounds[1], unit_weights=args.unit_weights)
    else:
        bounds = Bounds(
            args.y_bounds[0], args.y_bounds[1],
            args.s_bounds[0], args.s_bounds[1],
            args.w_bounds[0], args.w_bounds[1],
            binary_y=False, unit_weights=args.unit_weights,
        )

    y, s, w = read_dataset_csv(args.input)
    sums = compute_sums_from_arrays(y, s, w, bounds)

    scales = _scales(args.scale)
    root = np.random.SeedSequence(args.seed)
    release_seq, *mc_seqs = root.spawn(1 + len(scales))
    released = release(sums, bounds, budget, mechanism, np.random.default_rng(release_seq))

    estimates = []
    public = []
    for scale, mc_seq in zip(scales, mc_seqs):
        estimates.append(ci_no_correction(released, scale, args.level).to_json_dict())
        estimates.append(
            ci_monte_carlo(
                released, scale, args.level, args.mc_draws, np.random.default_rng(mc_seq)
            ).to_json_dict()
        )
        estimates.append(ci_analytical(released, scale, args.level).to_json_dict())
        if args.include_public:
            public.append(public_estimate(sums, scale, args.level).to_json_dict())

    doc = {"input": str(args.input), "released": released.to_json_dict(), "estimates": estimates}
    if args.include_public:
        doc["public_estimates"] = public
    print(json.dumps(doc, indent=2))
    return 0


def _merge_sim_settings(args: argparse.Namespace) -> dict:
    settings = dict(_SIM_DEFAULTS)
    if args.config is not None:
        with args.config.open(encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(settings)
        if unknown:
            raise InvalidConfigError(f"unknown config fields: {sorted(unknown)}")
        settings.update(loaded)
    overrides = {
        "n": args.n,
        "epsilons": args.epsilon,
        "delta": args.delta,
        "weighted": args.weighted,
        "mechanism": args.mechanism,
        "scale": args.scale,
        "true_ratio": args.true_ratio,
        "replications": args.replications,
        "mc_draws": args.mc_draws,
        "level": args.level,
        "seed": args.seed,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return settings


def format_rows_table(config: SimulationConfig, rows: list[ExperimentRow]) -> str:
    """Human-readable summary: one block per cell, epsilon rows by method."""
    by_key = {(row.method, row.epsilon): row for row in rows}
    pub = by_key[(Method.PUBLIC, None)]
    lines = [
        f"mechanism={config.mechanism.value}  scale={config.scale.value}  n={config.n}  "
        f"weighted={'yes' if config.weighted else 'no'}  replications={config.replications}  "
        f"level={config.level:g}  effective n={pub.mean_effective_n:,.0f}",
        f"public method: width = {pub.mean_width:.3f}, coverage = {pub.coverage:.3f}, "
        f"score = {pub.mean_interval_score:.3f}",
        "",
        f"{'':>8}  {'no_correction':^23}  {'monte_carlo':^23}  {'analytical':^23}",
        f"{'epsilon':>8}  " + "  ".join([f"{'width':>7} {'cover':>7} {'score':>7}"] * 3),
    ]
    for eps in config.epsilons:
        parts = [f"{eps:>8g}"]
        for method in (Method.NO_CORRECTION, Method.MONTE_CARLO, Method.ANALYTICAL):
            row = by_key[(method, eps)]
            parts.append(f"{row.mean_width:>7.3f} {row.coverage:>7.3f} {row.mean_interval_score:>7.3f}")
        lines.append("  ".join(parts))
    refusals = sum(row.refusal_count for row in rows)
    if refusals:
        lines.append(f"(refused replications across cells: {refusals})")
    return "\n".join(lines)


def _cell_filename(config: SimulationConfig) -> str:
    weighted = "weighted" if config.weighted else "unweighted"
    return f"{config.mechanism.value}_{config.scale.value}_n{config.n}_{weighted}.csv"


def _run_simulate(args: argparse.Namespace) -> int:
    settings = _merge_sim_settings(args)
    mechanism = MechanismKind(settings["mechanism"])
    delta = _resolve_delta(settings["delta"], mechanism)
    scales = _scales(settings["scale"])
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if threads < 1:
        raise InvalidConfigError(f"threads must be at least 1, got {threads}")

    out_dir = args.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    cells = []
    for scale in scales:
        config = SimulationConfig(
            n=int(settings["n"]),
            epsilons=tuple(float(e) for e in settings["epsilons"]),
            delta=delta,
            weighted=bool(settings["weighted"]),
            mechanism=mechanism,
            scale=scale,
            true_ratio=float(settings["true_ratio"]),
            replications=int(settings["replications"]),
            mc_draws=int(settings["mc_draws"]),
            level=float(settings["level"]),
            master_seed=int(settings["seed"]),
        )
        rows = run_experiment(config, threads=threads)
        write_rows_csv(rows, out_dir / _cell_filename(config))
        cells.append({"config": config.to_json_dict(), "rows": [r.to_json_dict() for r in rows]})
        print(format_rows_table(config, rows))
        print()

    report = out_dir / "report.json"
    with report.open("w", encoding="utf-8") as fh:
        json.dump({"cells": cells}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {report}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return _run_estimate(args)
        return _run_simulate(args)
    except (DPRatioError, OSError, json.JSONDecodeError) as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        line = getattr(exc, "line", None)
        if line is not None:
            error["line"] = line
        index = getattr(exc, "index", None)
        if index is not None:
            error["index"] = index
        print(json.dumps({"error": error}, indent=2))
        return 2


if __name__ == "__main__":
    sys.exit(main())
