"""Command-line entry points: solve, train, sweep, compare."""

from __future__ import annotations

import argparse
import sys

from .harness import (
    ALGORITHMS,
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    emit_results,
    load_config,
    run_solve,
    run_sweep,
    run_training,
    write_summary,
)


def _base_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", type=str, default=None,
                   help="YAML experiment config (defaults used when omitted)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's seed list with one seed")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--strict", action="store_true",
                   help="treat equilibrium verification failures as errors")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwmarket",
        description="Bandwidth-pricing Stackelberg market experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    _base_parser(sub, "solve", "solve and verify the analytic equilibrium")

    p_train = _base_parser(sub, "train", "train pricing agents")
    p_train.add_argument("--algo", choices=ALGORITHMS, default="tiny_madrl")

    p_sweep = _base_parser(sub, "sweep", "equilibrium sweep over a parameter grid")
    p_sweep.add_argument("--param", choices=("c", "p_bar", "I", "J"), default="c")
    p_sweep.add_argument("--grid", type=float, nargs="+", default=None)

    p_cmp = _base_parser(sub, "compare", "train every algorithm and summarize")
    p_cmp.add_argument("--algo", choices=ALGORITHMS, nargs="+",
                       default=list(ALGORITHMS))
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.out is not None:
        cfg.out = args.out
    if args.strict:
        cfg.strict = True
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "solve":
            records = [run_solve(cfg, seed) for seed in cfg.seeds]
        elif args.command == "train":
            records = [run_training(cfg, args.algo, seed) for seed in cfg.seeds]
        elif args.command == "sweep":
            grid = args.grid or [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
            if args.param in ("I", "J"):
                grid = [int(v) for v in grid]
            spec = SweepSpec(args.param, grid, cfg.seeds)
            records, aggregate = run_sweep(cfg, spec)
            for value, (mean, sd) in aggregate.items():
                print(f"{args.param}={value}: avg reward {mean:.4f} +- {sd:.4f}")
        else:  # compare
            records = [run_solve(cfg, seed) for seed in cfg.seeds]
            for algo in args.algo:
                records += [run_training(cfg, algo, seed) for seed in cfg.seeds]
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    csv_path = emit_results(records, cfg.out, fmt="csv")
    emit_results(records, cfg.out, fmt="jsonl")
    summary_path = write_summary(records, cfg.out)
    print(f"wrote {csv_path} and {summary_path}")
    if cfg.strict and any(not r.consistent for r in records):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
