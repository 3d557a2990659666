"""Command-line interface.

Subcommands:
  run       execute an experiment config file, write results
  sweep     grid shorthand: build the config from flags and run it
  validate  schema-check a config file
  bench     time the recursive-inverse path against dense solves
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import emit_bench, run_benchmark, scaling_exponent
from .harness import ExperimentConfig, emit_results, run_experiment
from .sysmodel import ConfigError


def _parse_floats(text: str):
    return [float(x) for x in text.split(",") if x != ""]


def _parse_ints(text: str):
    return [int(x) for x in text.split(",") if x != ""]


def _add_run_output_args(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _write(records, out_dir: Path, fmt: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"results.{fmt}"
    emit_results(records, path, fmt)
    return path


def cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    records = run_experiment(config, workers=args.workers)
    path = _write(records, Path(args.out), args.format)
    print(f"wrote {len(records)} records to {path}")
    return 0


def cmd_sweep(args) -> int:
    raw = {
        "n_antennas": _parse_ints(args.n),
        "n_users": args.k,
        "p_dbm": _parse_floats(args.p_dbm),
        "p_total_dbm": args.ptot_dbm,
        "bits": [_parse_ints(pat) for pat in args.bits.split(";")],
        "kappa": _parse_floats(args.kappa),
        "algorithms": args.algorithms.split(","),
        "n_trials": args.trials,
        "seed": args.seed,
        "mc_draws": args.mc_draws,
        "low_complexity": args.low_complexity,
    }
    config = ExperimentConfig.from_dict(raw)
    records = run_experiment(config, workers=args.workers)
    path = _write(records, Path(args.out), args.format)
    print(f"wrote {len(records)} records to {path}")
    return 0


def cmd_validate(args) -> int:
    try:
        config = ExperimentConfig.from_file(args.config)
    except ConfigError as err:
        print(f"invalid: {err}", file=sys.stderr)
        return 1
    grid = (
        len(config.n_antennas) * len(config.p_dbm) * len(config.bits)
        * len(config.kappa) * config.n_trials * len(config.algorithms)
    )
    print(f"ok: {grid} runs over {len(config.algorithms)} algorithms")
    return 0


def cmd_bench(args) -> int:
    rows = run_benchmark(
        _parse_ints(args.n_list), k=args.k, batch=args.batch,
        repeats=args.repeats, seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "bench.csv"
    emit_bench(rows, path)
    print(f"wrote {path}; solve-time exponent (recursive path): "
          f"{scaling_exponent(rows, 'sm'):.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrsma",
        description="Quantized MU-MIMO rate-splitting precoding under a power budget",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config file")
    p.add_argument("--config", required=True)
    _add_run_output_args(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a grid given by flags")
    p.add_argument("--n", default="16", help="antenna counts, comma separated")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--p-dbm", default="30", dest="p_dbm")
    p.add_argument("--ptot-dbm", type=float, default=40.0, dest="ptot_dbm")
    p.add_argument("--bits", default="4,8,12,16",
                   help="bit pattern; separate multiple patterns with ';'")
    p.add_argument("--kappa", default="0.4")
    p.add_argument("--algorithms", default="qpcas,qrzf")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-draws", type=int, default=0, dest="mc_draws")
    p.add_argument("--low-complexity", action="store_true", dest="low_complexity")
    _add_run_output_args(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("validate", help="schema-check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("bench", help="recursive-inverse vs dense timing")
    p.add_argument("--n-list", default="32,64,128,256", dest="n_list")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--batch", type=int, default=24)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
