"""Command-line interface.

Subcommands: run, compare, bounds, oracle-check.  Exit code 0 on success,
2 on configuration rejection or runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, load_config
from .harness import compare, oracle_check, parse_constants, run_experiment, write_bounds_report


def _add_common(parser):
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="base seed (overrides config)")
    parser.add_argument("--reps", type=int, default=None, help="repetitions (overrides config)")
    parser.add_argument("--workers", type=int, default=1, help="parallel repetition workers")


def _load(path, args):
    cfg = load_config(path)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        if args.reps < 1:
            raise ConfigError("--reps must be >= 1")
        overrides["repetitions"] = args.reps
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="distpg",
                                     description="decentralized policy-gradient simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment configuration")
    p_run.add_argument("config")
    _add_common(p_run)

    p_cmp = sub.add_parser("compare", help="run and compare several configurations")
    p_cmp.add_argument("configs", nargs="+")
    _add_common(p_cmp)

    p_bounds = sub.add_parser("bounds", help="evaluate the closed-form regime report")
    p_bounds.add_argument("config")
    p_bounds.add_argument("constants")
    p_bounds.add_argument("--out", default=None)

    p_oracle = sub.add_parser("oracle-check", help="self-check the exact-gradient oracle")
    p_oracle.add_argument("config")
    p_oracle.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load(args.config, args)
            out = run_experiment(cfg, out_dir=cfg.out_dir, workers=args.workers)
            print(f"wrote {len(out.files)} files to {out.out_dir}")
            return 0
        if args.command == "compare":
            cfgs = [_load(path, args) for path in args.configs]
            out_dir = args.out or cfgs[0].out_dir
            summary = compare(cfgs, out_dir=out_dir, workers=args.workers)
            for label, wins in zip(summary.labels, summary.win_counts):
                print(f"{label}: {wins} wins, sigma = {summary.sigmas[label]:.4f}")
            print(f"comparison written to {out_dir}")
            return 0
        if args.command == "bounds":
            cfg = _load(args.config, args)
            with open(args.constants, encoding="utf-8") as fh:
                constants = parse_constants(fh.read())
            out_dir = args.out or cfg.out_dir
            text, files = write_bounds_report(cfg, constants, out_dir)
            print(text, end="")
            print(f"report written to {files[0]}")
            return 0
        if args.command == "oracle-check":
            cfg = _load(args.config, args)
            ok, report = oracle_check(cfg)
            print(report, end="")
            return 0 if ok else 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
