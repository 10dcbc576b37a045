"""Command-line entry point: ``simulate``, ``solve-one`` and ``crlb``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .core import ValidationError, as_point, truth_vector
from .crlb import UnboundedBoundError, fisher_information, jensen_bound
from .harness import (ConfigError, ExperimentConfig, format_summary, read_config, run_campaign,
                      sample_sensor, summarize, with_overrides, write_results)
from .noise import NoiseMode, NoiseSpec, measure
from .solver import localize


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _modes(text: str) -> tuple[NoiseMode, ...]:
    try:
        return tuple(NoiseMode.parse(v.strip()) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load(path) -> ExperimentConfig:
    return read_config(path) if path else ExperimentConfig()


def cmd_simulate(args) -> int:
    config = with_overrides(_load(args.config), eta_grid=args.eta_grid, trials=args.trials,
                            modes=args.modes, master_seed=args.seed,
                            weighted=True if args.weighted else None)
    progress = None
    if args.progress:
        progress = lambda k, n: print(f"\r{k}/{n}", end="" if k < n else "\n", file=sys.stderr)
    records = run_campaign(config, workers=args.workers, progress=progress)
    summary = summarize(records)
    write_results(records, summary, args.out, args.summary)
    print(format_summary(summary), end="")
    failed = sum(not r.succeeded for r in records)
    if failed:
        print(f"{failed} of {len(records)} trials did not solve to optimality", file=sys.stderr)
    return 0


def cmd_solve_one(args) -> int:
    config = with_overrides(_load(args.config), master_seed=args.seed)
    x = sample_sensor(config, 0)
    if x is None:
        print("could not sample a non-degenerate sensor position", file=sys.stderr)
        return 1
    anchors, scenario = config.anchor_set(), config.scenario()
    batch = measure(x, anchors, scenario, NoiseSpec(args.eta, args.mode, config.master_seed, 0))
    sol = localize(anchors, scenario, batch.values, delta=config.delta, settings=config.solver,
                   weighted=config.weighted)
    print(f"x_true            {' '.join(f'{v:.9f}' for v in x)}")
    print(f"error_m           {np.linalg.norm(sol.x_hat - x):.9f}")
    print(sol.describe())
    return 0


def cmd_crlb(args) -> int:
    config = _load(args.config)
    anchors, scenario = config.anchor_set(), config.scenario()
    x = as_point(args.x, 3)
    info = fisher_information(x, anchors, scenario, args.eta)
    with np.printoptions(precision=10, suppress=False, linewidth=120):
        print("J =")
        print(info.J)
    print(f"true differences  {' '.join(f'{v:.9f}' for v in truth_vector(x, anchors, scenario))}")
    try:
        print(f"bound_m           {jensen_bound(info):.12g}")
    except UnboundedBoundError as exc:
        print(f"bound_m           unavailable ({exc})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtdoa", description="TDoA localization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo campaign and write CSV results")
    p.add_argument("--config", help="YAML experiment file (default: built-in testbed)")
    p.add_argument("--eta-grid", type=_floats)
    p.add_argument("--trials", type=int)
    p.add_argument("--modes", type=_modes)
    p.add_argument("--seed", type=int)
    p.add_argument("--weighted", action="store_true", help="use the likelihood-weighted objective")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--summary", default=None, help="summary CSV (default: <out>.summary.csv)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve-one", help="solve a single seeded instance and print the solution")
    p.add_argument("--config")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--mode", type=NoiseMode.parse, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_solve_one)

    p = sub.add_parser("crlb", help="print the Fisher information and error bound at a position")
    p.add_argument("--config")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--x", type=_floats, required=True)
    p.set_defaults(func=cmd_crlb)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # campaign-level failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
