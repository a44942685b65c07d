"""Acceptance criteria, each at its stated tolerance.

Every test appends one PASS/FAIL line that is printed in the terminal summary.
"""
import hashlib
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

import abcd_dop.population as population
from abcd_dop.cli import main
from abcd_dop.components import (
    apply_anti_convergence,
    apply_exclusion,
    detect_change,
    local_search,
)
from abcd_dop.config import PRESETS, build_preset
from abcd_dop.engine import run
from abcd_dop.landscape import InstanceSpec, evaluate, make_landscape
from abcd_dop.metrics import RunTrace
from abcd_dop.optimizers import es_sample
from abcd_dop.parallel import default_jobs, pmap
from abcd_dop.tuner import SearchSpace, active_params, race, sample_params

from .conftest import ACCEPTANCE_LINES, make_state

CASES = 10_000


def _report(num: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}")
    assert ok, detail


# 1 -----------------------------------------------------------------------------

def test_01_evaluate_matches_brute_force():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1000):
        spec = InstanceSpec(dimensions=int(rng.integers(1, 11)), n_peaks=int(rng.integers(1, 21)),
                            seed=k)
        ls = make_landscape(spec)
        pts = rng.uniform(0, 100, size=(100, spec.dimensions))
        got = evaluate(ls, pts)
        for x, g in zip(pts, got):
            ref = max(h - w * math.dist(x, c)
                      for h, w, c in zip(ls.heights, ls.widths, ls.centers))
            worst = max(worst, abs(g - ref) / max(1.0, abs(ref)))
    elapsed = time.perf_counter() - t0
    _report(1, "evaluate vs brute force", worst <= 1e-12 and elapsed < 10,
            f"max rel diff {worst:.1e} (tol 1e-12), {elapsed:.1f}s (limit 10s)")


# 2 -----------------------------------------------------------------------------

def test_02_offline_error_oracle():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    oracle_max = 0.0
    for t in range(100):
        n_env, freq = int(rng.integers(1, 6)), int(rng.integers(50, 2000))
        ne = n_env * freq
        tr = RunTrace(ne)
        oracle = RunTrace(ne)
        errs = []
        for e in range(1, n_env + 1):
            opt = float(rng.uniform(30, 70))
            best = np.maximum.accumulate(opt - rng.exponential(10.0, freq))
            if t % 2:
                tr.record_block(best, opt, e)
            else:
                for b in best:
                    tr.record_evaluation(float(b), opt, e)
            oracle.record_block(np.full(freq, opt), opt, e)
            errs.extend(abs(opt - best))
        naive = np.cumsum(errs) / np.arange(1, ne + 1)
        naive[-1] = math.fsum(errs) / ne
        rel = np.abs(tr.offline[:ne] - naive) / np.maximum(np.abs(naive), 1e-300)
        worst = max(worst, float(rel.max()))
        oracle_max = max(oracle_max, float(np.abs(oracle.offline[:ne]).max()))
    elapsed = time.perf_counter() - t0
    _report(2, "offline error oracle",
            worst <= 1e-12 and oracle_max == 0.0 and elapsed < 5,
            f"max rel diff {worst:.1e} (tol 1e-12), oracle agent E_o {oracle_max}, "
            f"{elapsed:.1f}s (limit 5s)")


# 3 -----------------------------------------------------------------------------

def test_03_change_schedule():
    spec = InstanceSpec.from_shorthand("10D-10P-1s", seed=3)
    t0 = time.perf_counter()
    a = run(build_preset("mQSO"), spec, 100_000)
    elapsed = time.perf_counter() - t0
    b = run(build_preset("mQSO"), spec, 100_000)
    counts = a.trace.env_counts()
    ok = (counts == {e: 5000 for e in range(1, 21)} and elapsed < 60
          and a.trace.offline[:a.trace.n].tobytes() == b.trace.offline[:b.trace.n].tobytes())
    _report(3, "change schedule", ok,
            f"{len(counts)} environments, N(e) in {sorted(set(counts.values()))}, "
            f"deterministic replay, {elapsed:.1f}s per run")


# 4, 5 --------------------------------------------------------------------------

def _one(job):
    name, inst, seed = job
    spec = InstanceSpec.from_shorthand(inst, seed=seed)
    return run(build_preset(name).with_seed(seed), spec, 100_000).final_eo


def _errors(name: str, inst: str) -> np.ndarray:
    jobs = [(name, inst, i) for i in range(10)]
    return np.array(pmap(_one, jobs, default_jobs()))


@pytest.mark.slow
def test_04_mqso_beats_pso_in_5d():
    mq, pso = _errors("mQSO", "5D-10P-1s"), _errors("PSO_baseline", "5D-10P-1s")
    p = stats.mannwhitneyu(mq, pso, alternative="less").pvalue
    ok = mq.mean() < pso.mean() and p < 0.05
    _report(4, "5D-10P-1s mQSO < PSO_baseline", ok,
            f"mQSO {mq.mean():.2f}({mq.std(ddof=1):.2f}) vs PSO {pso.mean():.2f}"
            f"({pso.std(ddof=1):.2f}), one-sided p={p:.4f} (alpha 0.05)")


@pytest.mark.slow
def test_05_mqso_degrades_in_10d():
    mq, man = _errors("mQSO", "10D-10P-1s"), _errors("AbCD_man", "10D-10P-1s")
    p = stats.mannwhitneyu(mq, man, alternative="greater").pvalue
    ok = mq.mean() > man.mean() and p < 0.05
    _report(5, "10D-10P-1s mQSO > AbCD_man", ok,
            f"mQSO {mq.mean():.2f}({mq.std(ddof=1):.2f}) vs AbCD_man {man.mean():.2f}"
            f"({man.std(ddof=1):.2f}), one-sided p={p:.4f} (alpha 0.05)")


# 6 -----------------------------------------------------------------------------

def _random_state(rng, m_max=6, size_max=5, d_max=5):
    d = int(rng.integers(1, d_max + 1))
    ls = make_landscape(InstanceSpec(dimensions=d, n_peaks=int(rng.integers(1, 11)),
                                     seed=int(rng.integers(2**31))))
    sizes = [int(rng.integers(1, size_max + 1)) for _ in range(int(rng.integers(1, m_max + 1)))]
    return ls, sizes


def test_06_component_properties():
    rng = np.random.default_rng(6)
    bad = {"exclusion": 0, "anti_convergence": 0, "local_search": 0, "change_detection": 0}

    for _ in range(CASES):
        ls, sizes = _random_state(rng)
        ps, ev = make_state(ls, sizes, rng)
        r = float(rng.uniform(0, 120))
        start, n = ps.sbest_pos.copy(), ps.pop_size
        done = set(apply_exclusion(ps, r, ev, rng))
        m = len(sizes)
        for i in range(m):
            for j in range(i + 1, m):
                if np.linalg.norm(start[i] - start[j]) < r and not ({i, j} & done):
                    bad["exclusion"] += 1
        bad["exclusion"] += ps.pop_size != n

    for _ in range(CASES):
        ls, sizes = _random_state(rng)
        m, d = len(sizes), ls.dimensions
        centers = rng.uniform(0, 100, size=(m, d))
        spread = np.where(rng.random(m) < 0.8, 0.01, 30.0)
        pos = np.concatenate([c + rng.uniform(-s, s, size=(k, d))
                              for c, s, k in zip(centers, spread, sizes)])
        ps, ev = make_state(ls, sizes, rng, positions=np.clip(pos, 0, 100))
        r_conv = float(rng.uniform(0.05, 20))
        diam = ps.diameters()
        before, worst = ps.positions.copy(), int(np.argmin(ps.sbest_fit))
        hit = apply_anti_convergence(ps, r_conv, ev, rng)
        if m >= 2 and np.all(diam < r_conv):
            bad["anti_convergence"] += hit != worst
        else:
            bad["anti_convergence"] += hit is not None or ev.evals_used != 0 \
                or not np.array_equal(before, ps.positions)
        bad["anti_convergence"] += ps.pop_size != len(before)

    for _ in range(CASES):
        ls, sizes = _random_state(rng)
        ps, ev = make_state(ls, sizes, rng)
        etry = int(rng.integers(0, 21))
        g0, n = ps.gbest_fit, ps.pop_size
        local_search(ps, float(rng.uniform(0, 80)), etry, ev, rng)
        bad["local_search"] += ev.evals_used != etry or ps.gbest_fit < g0 or ps.pop_size != n

    for _ in range(CASES):
        ls, sizes = _random_state(rng)
        ps, ev = make_state(ls, sizes, rng)
        snap = (ps.positions.copy(), ps.pbest_fit.copy(), ps.sbest_fit.copy())
        silent = detect_change(ps, ev) is False
        ls.heights += float(rng.uniform(0.01, 5.0))
        fired = detect_change(ps, ev) is True
        untouched = (np.array_equal(snap[0], ps.positions) and np.array_equal(snap[1], ps.pbest_fit)
                     and np.array_equal(snap[2], ps.sbest_fit))
        bad["change_detection"] += not (silent and fired and untouched)

    _report(6, "component trigger properties", not any(bad.values()),
            f"{CASES} cases each, violations {bad}")


# 7 -----------------------------------------------------------------------------

def test_07_es_sampler():
    rng = np.random.default_rng(7)
    d, r = 5, 5.0
    center = rng.uniform(20, 80, d)
    pts = es_sample(center, r, rng, n=100_000)
    dist = np.linalg.norm(pts - center, axis=1)
    target = r * d / (d + 1)
    rel = abs(dist.mean() - target) / target
    _report(7, "ES sampler distribution", rel <= 0.01 and dist.max() <= r,
            f"mean distance {dist.mean():.4f} vs {target:.4f} (rel {rel:.2e}, tol 1e-2), "
            f"max distance {dist.max():.4f} <= {r}")


# 8 -----------------------------------------------------------------------------

def _digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_08_determinism(tmp_path):
    run_args = ["run", "--preset", "mQSO", "--preset", "AbCD_auto", "--preset", "ES_baseline",
                "--instance", "5D-10P-1s", "--instance", "10D-10P-1s", "--runs", "3",
                "--ne", "12000", "--seed", "11"]
    sweep_args = ["sweep", "--component", "exclusion", "--preset", "mQSO",
                  "--instance", "5D-10P-1s", "--runs", "2", "--ne", "6000", "--seed", "5"]
    same = True
    n_files = 0
    for k, args in enumerate((run_args, sweep_args)):
        outs = []
        for tag, jobs in (("a", "1"), ("b", "1"), ("c", "2"), ("d", "3")):
            out = tmp_path / f"{k}{tag}"
            assert main(args + ["--out", str(out), "--jobs", jobs]) == 0
            outs.append(_digest(out))
        same &= all(o == outs[0] for o in outs)
        n_files += len(outs[0])
    _report(8, "determinism", same,
            f"{n_files} CSV files byte-identical across repeats with --jobs 1, 2, 3")


# 9 -----------------------------------------------------------------------------

def _oracle_eval(cfg, inst):
    if cfg.name == "oracle":
        return 0.0
    return run(cfg, InstanceSpec(dimensions=2, n_peaks=3, seed=inst.seed), 600).final_eo


def test_09_tuner_sanity():
    space = SearchSpace()
    picks, over = [], 0
    for seed in range(5):
        oracle = replace(build_preset("PSO_baseline"), name="oracle")
        res = race(space, 60, 600, np.random.default_rng(seed),
                   initial=[oracle, build_preset("PSO_baseline")], evaluate=_oracle_eval)
        picks.append(res.best.name)
        over += res.runs_used > 60
    rng = np.random.default_rng(9)
    violations = 0
    for _ in range(CASES):
        p = sample_params(space, rng)
        violations += set(p) != active_params(p)
        violations += not p["multipopulation"] and ("exclusion" in p or "anti_convergence" in p)
    ok = all(n == "oracle" for n in picks) and violations == 0 and over == 0
    _report(9, "tuner sanity", ok,
            f"oracle picked {picks.count('oracle')}/5, {violations} conditional violations "
            f"in {CASES} samples, budget overruns {over}")


# 10 ----------------------------------------------------------------------------

def test_10_budget_exactness(monkeypatch):
    counter = {"rows": 0}
    real = population.evaluate

    def counted(ls, x):
        out = real(ls, x)
        counter["rows"] += np.asarray(x).reshape(-1, ls.dimensions).shape[0]
        return out

    monkeypatch.setattr(population, "evaluate", counted)
    mismatches = []
    ne_values = (100, 5000, 12_345, 30_001)
    for name in sorted(PRESETS):
        for ne in ne_values:
            cfg = build_preset(name)
            if ne < cfg.pop_size:
                continue
            counter["rows"] = 0
            res = run(cfg, InstanceSpec.from_shorthand("5D-10P-1s", seed=ne), ne)
            if not (len(res.trace) == ne == counter["rows"]):
                mismatches.append((name, ne, len(res.trace), counter["rows"]))
    _report(10, "budget exactness", not mismatches,
            f"{len(PRESETS)} presets x NE {ne_values}: mismatches {mismatches}")
