"""Batch runs, one-component sweeps, aggregation and plot-ready CSV export."""
from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import AlgorithmConfig, ValidationError, validate
from .engine import RunResult, run
from .landscape import InstanceSpec
from .metrics import RunTrace, aggregate_runs, format_mean_std
from .parallel import pmap

SUMMARY_HEADER = ["config_id", "instance_id", "run", "final_offline_error"]
AGG_HEADER = ["config_id", "instance_id", "mean_eo", "std_eo"]

SWEEP_RADII = (0.0, 1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0)
SWEEP_COMPONENTS = ("optimizer", "multipopulation", "exclusion", "anti_convergence", "local_search")


@dataclass(frozen=True)
class ExperimentSpec:
    configs: tuple[AlgorithmConfig, ...]
    instances: tuple[InstanceSpec, ...]
    runs: int = 1
    ne: int = 500_000
    base_seed: int = 0
    out: Path = Path("abcd_out")
    jobs: int = 1
    plot_every: int = 100
    write_traces: bool = True

    def __post_init__(self):
        if self.runs < 1:
            raise ValidationError("runs must be ≥ 1")
        if not self.configs:
            raise ValidationError("at least one configuration is required")
        if not self.instances:
            raise ValidationError("at least one instance is required")


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=+-]", "_", name)


def _one_run(job: tuple[AlgorithmConfig, InstanceSpec, int], ne: int) -> tuple[int, RunResult]:
    cfg, inst, seed = job
    return seed, run(cfg.with_seed(seed), inst.with_seed(seed), ne)


def run_experiment(spec: ExperimentSpec) -> list[tuple]:
    """Run every (config, instance, run) triple and write all artifacts.

    Run ``i`` uses seed ``base_seed + i`` for both the landscape and the
    algorithm stream, whatever the degree of parallelism.
    """
    for cfg in spec.configs:
        validate(cfg)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, inst, spec.base_seed + i)
            for cfg in spec.configs for inst in spec.instances for i in range(spec.runs)]
    results = pmap(partial(_one_run, ne=spec.ne), jobs, spec.jobs)

    rows = []
    by_instance: dict[str, list[tuple[str, int, RunTrace]]] = defaultdict(list)
    for (cfg, inst, seed), (_, res) in zip(jobs, results):
        run_idx = seed - spec.base_seed
        rows.append((res.config_id, res.instance_id, run_idx, res.final_eo))
        by_instance[res.instance_id].append((res.config_id, run_idx, res.trace))
        if spec.write_traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            path = tdir / f"{_safe(res.config_id)}__{_safe(res.instance_id)}__run{run_idx}.csv"
            with open(path, "w", newline="") as fh:
                res.trace.write_csv(fh)

    write_summary(rows, out / "summary.csv")
    write_aggregate(aggregate(rows), out / "summary_agg.csv")
    pdir = out / "plots"
    for inst_id, traces in by_instance.items():
        emit_plot_data(traces, pdir / _safe(inst_id), spec.plot_every)
    return rows


def write_summary(rows: Iterable[tuple], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for cid, iid, r, eo in rows:
            w.writerow([cid, iid, r, repr(float(eo))])


def read_summary(paths: Sequence[Path]) -> list[tuple]:
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != SUMMARY_HEADER:
                raise ValueError(f"{path}: not a summary file (header {reader.fieldnames})")
            for rec in reader:
                rows.append((rec["config_id"], rec["instance_id"], int(rec["run"]),
                             float(rec["final_offline_error"])))
    return rows


def aggregate(rows: Iterable[tuple]) -> list[tuple]:
    """``(config_id, instance_id, mean, std)`` in first-seen order."""
    groups: dict[tuple[str, str], list[float]] = {}
    for cid, iid, _, eo in rows:
        groups.setdefault((cid, iid), []).append(eo)
    return [(cid, iid, *aggregate_runs(v)) for (cid, iid), v in groups.items()]


def write_aggregate(agg: Iterable[tuple], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for cid, iid, m, s in agg:
            w.writerow([cid, iid, repr(m), repr(s)])


def report_table(agg: Sequence[tuple]) -> str:
    """Algorithms as rows, instances as columns, ``mean(std)`` cells."""
    configs = list(dict.fromkeys(a[0] for a in agg))
    insts = list(dict.fromkeys(a[1] for a in agg))
    cell = {(a[0], a[1]): format_mean_std(a[2], a[3]) for a in agg}
    header = ["Algorithm"] + insts
    body = [[c] + [cell.get((c, i), "-") for i in insts] for c in configs]
    widths = [max(len(r[j]) for r in [header] + body) for j in range(len(header))]
    lines = [" | ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in [header] + body]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def emit_plot_data(traces: Sequence[tuple[str, int, RunTrace]], prefix: Path,
                   every: int = 100) -> tuple[Path, Path]:
    """Write downsampled offline-error curves and per-environment end errors.

    ``traces`` holds ``(config_id, run, trace)`` triples. Produces
    ``<prefix>_offline_error.csv`` (``eval,config_id,run,offline_error``) and
    ``<prefix>_env_error.csv`` (``env,config_id,mean_current_error_at_env_end``).
    """
    if not traces:
        raise ValueError("no traces to export")
    if every < 1:
        raise ValueError("plot interval must be ≥ 1")
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    curve = prefix.parent / f"{prefix.name}_offline_error.csv"
    envs = prefix.parent / f"{prefix.name}_env_error.csv"

    end_errors: dict[tuple[int, str], list[float]] = {}
    with open(curve, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eval", "config_id", "run", "offline_error"])
        for cid, run_idx, tr in traces:
            idx = np.arange(every - 1, tr.n, every)
            for i in idx:
                w.writerow([int(i) + 1, cid, run_idx, repr(float(tr.offline[i]))])
            env = tr.env[: tr.n]
            last = np.flatnonzero(np.append(env[1:] != env[:-1], True))
            for i in last:
                end_errors.setdefault((int(env[i]), cid), []).append(float(tr.error[i]))
    with open(envs, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["env", "config_id", "mean_current_error_at_env_end"])
        for (e, cid) in sorted(end_errors, key=lambda k: (k[0], [t[0] for t in traces].index(k[1]))):
            w.writerow([e, cid, repr(float(np.mean(end_errors[(e, cid)])))])
    return curve, envs


def sweep_configs(base: AlgorithmConfig, component: str,
                  values: Sequence[float] | None = None) -> list[AlgorithmConfig]:
    """One configuration per grid value of ``component``, others held at ``base``.

    Exclusion and anti-convergence are swept with ten subpopulations, local
    search with ``etry = 20``.
    """
    t = base.toggles
    out = []
    if component == "optimizer":
        levels = values if values is not None else (0.0, 0.25, 0.5, 0.75, 1.0)
        for es in levels:
            out.append(replace(base, name=f"{base.name}[es_fraction={es:g}]",
                               optimizer=replace(base.optimizer, es_fraction=float(es))))
    elif component == "multipopulation":
        levels = values if values is not None else (1, 5, 10, 25, 50, 100)
        for n in levels:
            n = int(n)
            out.append(replace(base, name=f"{base.name}[n_subpops={n}]",
                               toggles=replace(t, multipopulation=n > 1, n_subpops=n)))
    elif component in ("exclusion", "anti_convergence"):
        key = "r_excl" if component == "exclusion" else "r_conv"
        levels = values if values is not None else SWEEP_RADII
        for r in levels:
            tog = replace(t, multipopulation=True, n_subpops=10, **{component: True, key: float(r)})
            out.append(replace(base, name=f"{base.name}[{key}={r:g}]", toggles=tog))
    elif component == "local_search":
        levels = values if values is not None else SWEEP_RADII
        for r in levels:
            tog = replace(t, local_search=True, r_ls=float(r), etry=20)
            out.append(replace(base, name=f"{base.name}[r_ls={r:g}]", toggles=tog))
    else:
        raise ValidationError(
            f"unknown component {component!r}; choose from {', '.join(SWEEP_COMPONENTS)}")
    for cfg in out:
        validate(cfg)
    return out
