"""Command-line front end.

Subcommands mirror the library pipeline:

  learn    evaluate every model offline, write rule-table artifacts
  run      run one policy over one workload
  sweep    run the adaptive policy across the epsilon sweep
  compare  run the full approach matrix on one shared workload

Exit codes: 0 success, 2 configuration or validation error, 3 I/O
error, 4 internal error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ModelSwitchError, ValidationError, ConfigError
from .experiment import do_compare, do_learn, do_run, do_sweep
from .report import SUMMARY_COLUMNS, summary_row

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelswitch",
        description="Deterministic simulator for energy-aware runtime ML model switching.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="experiment config file (INI); defaults used if omitted")
        p.add_argument("--seed", type=int, help="master experiment seed")
        p.add_argument("--out", help="output directory")

    p_learn = sub.add_parser("learn", help="offline evaluation: performance matrices and base rules")
    add_common(p_learn)

    p_run = sub.add_parser("run", help="run a single policy")
    add_common(p_run)
    p_run.add_argument(
        "--policy",
        help="policy to run: ecomls, naive1, naive2, naive3 or no_switch:<model>",
    )
    p_run.add_argument("--epsilon", type=float, help="exploration rate for the adaptive policy")
    p_run.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_sweep = sub.add_parser("sweep", help="run the adaptive policy across several epsilons")
    add_common(p_sweep)
    p_sweep.add_argument(
        "--epsilon",
        type=float,
        action="append",
        dest="epsilons",
        help="epsilon value; repeat the flag to sweep several",
    )
    p_sweep.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_cmp = sub.add_parser("compare", help="run the full approach matrix")
    add_common(p_cmp)
    p_cmp.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    return parser


def _load(args: argparse.Namespace):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "epsilon", None) is not None and args.command == "run":
        cfg.epsilon = args.epsilon
    if getattr(args, "epsilons", None):
        cfg.epsilons = tuple(args.epsilons)
    if getattr(args, "no_plots", False):
        cfg.plots = False
    cfg.validate()
    return cfg


def _print_reports(reports) -> None:
    print(",".join(SUMMARY_COLUMNS))
    for report in reports:
        print(",".join(str(v) for v in summary_row(report)))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "learn":
            for path in do_learn(cfg):
                print(path)
        elif args.command == "run":
            report = do_run(cfg, args.policy)
            _print_reports([report])
        elif args.command == "sweep":
            _print_reports(do_sweep(cfg))
        elif args.command == "compare":
            _print_reports(do_compare(cfg))
        return EXIT_OK
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ModelSwitchError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
