"""Command-line front end: ``run``, ``sweep``, ``tune`` and ``report``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiment, tuner
from .config import (
    PRESETS,
    ConfigParseError,
    ValidationError,
    build_preset,
    load_config,
    save_config,
)
from .landscape import InstanceSpec, LandscapeError
from .parallel import default_jobs

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_IO = 0, 2, 3, 4
DEFAULT_INSTANCE = "10D-10P-1s"

log = logging.getLogger("abcd_dop")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        p.add_argument("--preset", action="append", default=[],
                       help=f"named configuration (repeatable): {', '.join(sorted(PRESETS))}")
        p.add_argument("--config", action="append", default=[], type=Path,
                       help="configuration file (repeatable)")
        p.add_argument("--instance", action="append", default=[],
                       help="instance such as 5D-10P-1s (repeatable)")
        p.add_argument("--runs", type=int, default=1)
    p.add_argument("--ne", type=int, default=500_000, help="evaluations per run")
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed + i")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (default: $ABCD_OUT or ./abcd_out)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abcd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run configurations on instances")
    _common(p)
    p.add_argument("--plot-every", type=int, default=100,
                   help="keep every k-th evaluation in the plot CSV")
    p.add_argument("--no-traces", action="store_true", help="skip per-run trace CSVs")

    p = sub.add_parser("sweep", help="grid over one component, others at the base config")
    _common(p)
    p.add_argument("--component", required=True, choices=experiment.SWEEP_COMPONENTS)
    p.add_argument("--values", type=float, nargs="+", default=None,
                   help="override the default grid")
    p.add_argument("--plot-every", type=int, default=100)
    p.add_argument("--no-traces", action="store_true")

    p = sub.add_parser("tune", help="racing-based automatic design")
    _common(p, with_config=False)
    p.set_defaults(ne=50_000)
    p.add_argument("--budget", type=int, default=600, help="total number of runs")
    p.add_argument("--candidates", type=int, default=8, help="candidates per race")
    p.add_argument("--first-test", type=int, default=10)
    p.add_argument("--each-test", type=int, default=5)
    p.add_argument("--elites", type=int, default=7)

    p = sub.add_parser("report", help="aggregate summary CSVs into a mean(std) table")
    p.add_argument("summaries", nargs="*", type=Path,
                   help="summary.csv files (default: <out>/summary.csv)")
    p.add_argument("--out", type=Path, default=None)
    return parser


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get("ABCD_OUT", "abcd_out"))


def _configs_and_instances(args):
    configs, instances = [], []
    for name in args.preset:
        configs.append(build_preset(name))
    for path in args.config:
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        cfg, insts = load_config(path)
        configs.append(cfg)
        instances.extend(insts)
    if not configs:
        raise UsageError("give at least one --preset or --config")
    if args.instance:
        instances = [InstanceSpec.from_shorthand(i) for i in args.instance]
    if not instances:
        instances = [InstanceSpec.from_shorthand(DEFAULT_INSTANCE)]
    return configs, list(dict.fromkeys(instances))


def _experiment(args, configs, instances) -> experiment.ExperimentSpec:
    return experiment.ExperimentSpec(
        configs=tuple(configs),
        instances=tuple(instances),
        runs=args.runs,
        ne=args.ne,
        base_seed=args.seed,
        out=_out_dir(args),
        jobs=args.jobs or default_jobs(),
        plot_every=args.plot_every,
        write_traces=not args.no_traces,
    )


def cmd_run(args) -> int:
    configs, instances = _configs_and_instances(args)
    spec = _experiment(args, configs, instances)
    rows = experiment.run_experiment(spec)
    print(experiment.report_table(experiment.aggregate(rows)), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    configs, instances = _configs_and_instances(args)
    if len(configs) != 1:
        raise UsageError("sweep takes exactly one base configuration")
    grid = experiment.sweep_configs(configs[0], args.component, args.values)
    rows = experiment.run_experiment(_experiment(args, grid, instances))
    print(experiment.report_table(experiment.aggregate(rows)), end="")
    return EXIT_OK


def cmd_tune(args) -> int:
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    result = tuner.race(
        tuner.SearchSpace(), args.budget, args.ne, np.random.default_rng(args.seed),
        n_candidates=args.candidates, first_test=args.first_test, each_test=args.each_test,
        n_elites=args.elites, jobs=args.jobs or default_jobs(), log=log.info,
    )
    with open(out / "tune_leaderboard.csv", "w", newline="") as fh:
        result.write_leaderboard(fh)
    save_config(replace(result.best, name="AbCD_auto"), out / "best_config.cfg")
    print(f"best candidate {result.best_id} after {result.runs_used} runs: {result.best_params}")
    return EXIT_OK


def cmd_report(args) -> int:
    paths = args.summaries or [_out_dir(args) / "summary.csv"]
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(f"summary file not found: {p}")
    agg = experiment.aggregate(experiment.read_summary(paths))
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    experiment.write_aggregate(agg, out / "report_agg.csv")
    table = experiment.report_table(agg)
    (out / "report.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "tune": cmd_tune, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"abcd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ConfigParseError, LandscapeError, tuner.TunerError) as exc:
        print(f"abcd: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"abcd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
