"""Iterated Friedman racing over the component search space."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterator, TextIO

import numpy as np
from scipy import stats

from .config import AlgorithmConfig, ComponentToggles, validate
from .engine import run
from .landscape import InstanceSpec
from .optimizers import OptimizerParams
from .parallel import pmap

OPTIMIZER_LEVELS = {"PSO": 0.0, "ES": 1.0, "AbCD_ES25": 0.25, "AbCD_ES50": 0.5, "AbCD_ES75": 0.75}
LEADERBOARD_HEADER = ["iteration", "candidate_id", "alive", "mean_rank", "mean_eo", "params"]


class TunerError(ValueError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    pop_sizes: tuple[int, ...] = (100, 150, 200, 300)
    optimizers: tuple[str, ...] = tuple(OPTIMIZER_LEVELS)
    phi: tuple[float, float] = (0.0, 2.5)
    r_cloud: tuple[float, float] = (0.0, 5.0)
    n_subpops: tuple[int, ...] = (10, 25, 50, 100)
    r_excl: tuple[float, float] = (0.0, 80.0)
    r_conv: tuple[float, float] = (0.0, 80.0)
    r_ls: tuple[float, float] = (0.0, 80.0)
    etry: tuple[int, int] = (1, 50)
    chi: float = 1.0

    def categorical(self) -> dict[str, tuple]:
        return {
            "pop_size": self.pop_sizes,
            "optimizer": self.optimizers,
            "multipopulation": (False, True),
            "n_subpops": self.n_subpops,
            "exclusion": (False, True),
            "anti_convergence": (False, True),
            "local_search": (False, True),
        }

    def real(self) -> dict[str, tuple[float, float]]:
        return {"phi1": self.phi, "phi2": self.phi, "r_cloud": self.r_cloud,
                "r_excl": self.r_excl, "r_conv": self.r_conv, "r_ls": self.r_ls}


def active_params(params: dict) -> set[str]:
    """Names whose values matter given the switches in ``params``."""
    act = {"pop_size", "optimizer", "multipopulation", "local_search"}
    es = OPTIMIZER_LEVELS[params["optimizer"]]
    if es < 1.0:
        act |= {"phi1", "phi2"}
    if es > 0.0:
        act.add("r_cloud")
    if params["multipopulation"]:
        act |= {"n_subpops", "exclusion", "anti_convergence"}
        if params["exclusion"]:
            act.add("r_excl")
        if params["anti_convergence"]:
            act.add("r_conv")
    if params["local_search"]:
        act |= {"r_ls", "etry"}
    return act


def _draw(space: SearchSpace, name: str, rng: np.random.Generator):
    cat = space.categorical()
    if name in cat:
        levels = cat[name]
        return levels[int(rng.integers(len(levels)))]
    if name == "etry":
        return int(rng.integers(space.etry[0], space.etry[1] + 1))
    lo, hi = space.real()[name]
    return float(rng.uniform(lo, hi))


_ORDER = ("pop_size", "optimizer", "phi1", "phi2", "r_cloud", "multipopulation", "n_subpops",
          "exclusion", "r_excl", "anti_convergence", "r_conv", "local_search", "r_ls", "etry")


def _normalize(params: dict) -> dict:
    """Force conditional switches off when their parent is off; drop inactive values."""
    p = dict(params)
    if not p["multipopulation"]:
        p["exclusion"] = False
        p["anti_convergence"] = False
    act = active_params(p)
    return {k: p[k] for k in _ORDER if k in act}


def sample_params(space: SearchSpace, rng: np.random.Generator) -> dict:
    raw = {name: _draw(space, name, rng) for name in _ORDER}
    return _normalize(raw)


def params_to_config(params: dict, space: SearchSpace = SearchSpace(), name: str = "candidate",
                     seed: int = 0) -> AlgorithmConfig:
    base = OptimizerParams()
    opt = OptimizerParams(
        chi=space.chi,
        phi1=params.get("phi1", base.phi1),
        phi2=params.get("phi2", base.phi2),
        r_cloud=params.get("r_cloud", base.r_cloud),
        es_fraction=OPTIMIZER_LEVELS[params["optimizer"]],
    )
    multi = bool(params["multipopulation"])
    tog = ComponentToggles(
        multipopulation=multi,
        n_subpops=params.get("n_subpops", 1) if multi else 1,
        exclusion=bool(params.get("exclusion", False)),
        r_excl=params.get("r_excl", 0.0),
        anti_convergence=bool(params.get("anti_convergence", False)),
        r_conv=params.get("r_conv", 0.0),
        local_search=bool(params["local_search"]),
        r_ls=params.get("r_ls", 0.0),
        etry=params.get("etry", 0),
    )
    cfg = AlgorithmConfig(name=name, pop_size=params["pop_size"], optimizer=opt,
                          toggles=tog, seed=seed)
    validate(cfg)
    return cfg


def sample_config(space: SearchSpace, rng: np.random.Generator, name: str = "candidate") -> AlgorithmConfig:
    return params_to_config(sample_params(space, rng), space, name)


def perturb_params(parent: dict, space: SearchSpace, rng: np.random.Generator,
                   p_categorical: float = 0.2, sigma_frac: float = 0.2) -> dict:
    """New parameter vector near ``parent``.

    Categoricals are redrawn with probability ``p_categorical``; reals get a
    Gaussian step of ``sigma_frac`` times the interval width, redrawn until
    inside the interval. Values newly activated by a switch are drawn fresh.
    """
    cat = space.categorical()
    reals = space.real()
    child = {}
    for name in _ORDER:
        if name not in parent:
            child[name] = _draw(space, name, rng)
        elif name in cat:
            child[name] = _draw(space, name, rng) if rng.random() < p_categorical else parent[name]
        elif name == "etry":
            lo, hi = space.etry
            child[name] = int(np.clip(round(_truncnorm(parent[name], sigma_frac * (hi - lo), lo, hi, rng)), lo, hi))
        else:
            lo, hi = reals[name]
            child[name] = _truncnorm(parent[name], sigma_frac * (hi - lo), lo, hi, rng)
    return _normalize(child)


def _truncnorm(mu: float, sigma: float, lo: float, hi: float, rng) -> float:
    if sigma <= 0:
        return float(mu)
    for _ in range(100):
        x = rng.normal(mu, sigma)
        if lo <= x <= hi:
            return float(x)
    return float(np.clip(mu, lo, hi))


def training_instances(rng: np.random.Generator, testing: bool = False) -> Iterator[InstanceSpec]:
    """Endless stream of MPB instances from the training (or testing) distribution."""
    if testing:
        peaks, dims, sev = (9, 11), (7, 9), (1.5, 2.5)
    else:
        peaks, dims, sev = (8, 10), (8, 10), (1.0, 2.0)
    while True:
        yield InstanceSpec(
            dimensions=int(dims[rng.integers(2)]),
            n_peaks=int(peaks[rng.integers(2)]),
            severity=float(sev[rng.integers(2)]),
            lambda_=0.0,
            change_frequency=5000,
            seed=int(rng.integers(2**31 - 1)),
        )


# -- rank test -----------------------------------------------------------------

def friedman(scores: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Friedman test on a (instances x candidates) matrix of errors (lower is better).

    Uses the tie-corrected statistic. Returns ``(statistic, p_value, mean_ranks)``.
    """
    k, m = scores.shape
    ranks = np.apply_along_axis(stats.rankdata, 1, scores)
    mean_ranks = ranks.mean(axis=0)
    if m < 2:
        return 0.0, 1.0, mean_ranks
    r_sum = ranks.sum(axis=0)
    num = (m - 1) * np.sum((r_sum - k * (m + 1) / 2.0) ** 2)
    den = np.sum(ranks ** 2) - k * m * (m + 1) ** 2 / 4.0
    if den <= 0:
        return 0.0, 1.0, mean_ranks
    t = num / den
    return float(t), float(stats.chi2.sf(t, m - 1)), mean_ranks


def critical_difference(m: int, k: int, alpha: float = 0.05) -> float:
    """Nemenyi critical difference of mean ranks for ``m`` candidates on ``k`` instances."""
    q = stats.studentized_range.ppf(1 - alpha, m, np.inf) / math.sqrt(2)
    return float(q * math.sqrt(m * (m + 1) / (6.0 * k)))


def eliminate(scores: np.ndarray, alpha: float = 0.05) -> np.ndarray:
    """Boolean survivor mask after one test; everyone survives unless Friedman rejects."""
    k, m = scores.shape
    keep = np.ones(m, dtype=bool)
    if m < 2:
        return keep
    _, p, mean_ranks = friedman(scores)
    if p >= alpha:
        return keep
    cd = critical_difference(m, k, alpha)
    keep = mean_ranks - mean_ranks.min() <= cd
    return keep


# -- race ------------------------------------------------------------------------

@dataclass
class Candidate:
    id: int
    params: dict
    config: AlgorithmConfig
    parent: int | None = None
    scores: dict[int, float] = field(default_factory=dict)
    mean_rank: float = float("nan")

    def mean_eo(self) -> float:
        return float(np.mean(list(self.scores.values()))) if self.scores else float("nan")


@dataclass
class TuneResult:
    best: AlgorithmConfig
    best_id: int
    best_params: dict
    leaderboard: list[tuple]
    runs_used: int
    elites_by_iteration: list[list[int]]
    instances: list[InstanceSpec]

    def write_leaderboard(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEADERBOARD_HEADER)
        for row in self.leaderboard:
            it, cid, alive, rank, eo, params = row
            w.writerow([it, cid, int(alive), f"{rank:.6f}", repr(eo), json.dumps(params, sort_keys=True)])


def _run_eo(job: tuple[AlgorithmConfig, InstanceSpec], ne: int) -> float:
    cfg, inst = job
    return run(cfg.with_seed(inst.seed), inst, ne).final_eo


def race(space: SearchSpace, budget_runs: int, ne: int, rng: np.random.Generator, *,
         n_candidates: int = 8, first_test: int = 10, each_test: int = 5, n_elites: int = 7,
         alpha: float = 0.05, n_iterations: int | None = None,
         initial: list[AlgorithmConfig] | None = None,
         evaluate: Callable[[AlgorithmConfig, InstanceSpec], float] | None = None,
         jobs: int = 1, log: Callable[[str], None] | None = None) -> TuneResult:
    """Iterated race. Returns the rank-1 elite and a per-iteration leaderboard.

    ``evaluate(config, instance) -> offline error`` defaults to one engine run
    of ``ne`` evaluations seeded by the instance, so every candidate on the
    same instance sees the same landscape and algorithm seeds.
    """
    if initial:
        cands = [Candidate(i, _params_of(c, space), c) for i, c in enumerate(initial)]
    else:
        cands = []
        for i in range(n_candidates):
            p = sample_params(space, rng)
            cands.append(Candidate(i, p, params_to_config(p, space, f"cand{i}")))
    if budget_runs < len(cands) * first_test:
        raise TunerError(
            f"budget of {budget_runs} runs cannot reach the first test "
            f"({len(cands)} candidates x {first_test} instances)")
    if evaluate is None:
        score_fn = partial(_run_eo, ne=ne)
        mapper = partial(pmap, score_fn, jobs=jobs)
    else:
        def mapper(jobs_):
            return [evaluate(c, i) for c, i in jobs_]

    # separate stream so candidate sampling never shifts the instance sequence
    inst_stream = training_instances(np.random.default_rng(int(rng.integers(2**63))))
    instances: list[InstanceSpec] = []
    next_id = len(cands)
    n_iter = n_iterations or 2 + int(math.log2(len(_ORDER)))
    remaining = budget_runs
    leaderboard: list[tuple] = []
    elites: list[Candidate] = []
    elites_history: list[list[int]] = []
    iteration = 0
    target = len(cands)

    while remaining > 0:
        iteration += 1
        if iteration > 1:
            new = []
            for _ in range(max(0, target - len(elites))):
                parent = _pick_parent(elites, rng)
                p = perturb_params(parent.params, space, rng)
                new.append(Candidate(next_id, p, params_to_config(p, space, f"cand{next_id}"),
                                     parent=parent.id))
                next_id += 1
            cands = elites + new
        # runs needed before the first test can happen
        to_first = sum(max(0, first_test - _n_cached(c, first_test)) for c in cands)
        if to_first > remaining:
            break
        iters_left = max(1, n_iter - iteration + 1)
        iter_budget = max(remaining // iters_left, to_first)
        alive = list(cands)
        k = 0
        spent = 0
        while True:
            while len(instances) <= k:
                instances.append(next(inst_stream))
            todo = [c for c in alive if k not in c.scores]
            if spent + len(todo) > iter_budget:
                break
            results = mapper([(c.config, instances[k]) for c in todo])
            for c, r in zip(todo, results):
                c.scores[k] = float(r)
            spent += len(todo)
            k += 1
            if k >= first_test and (k - first_test) % each_test == 0 and len(alive) > 1:
                mat = np.array([[c.scores[j] for c in alive] for j in range(k)])
                keep = eliminate(mat, alpha)
                _, _, ranks = friedman(mat)
                for c, r in zip(alive, ranks):
                    c.mean_rank = float(r)
                alive = [c for c, kp in zip(alive, keep) if kp]
                if log:
                    log(f"iteration {iteration}: {k} instances, {len(alive)} alive")
        remaining -= spent
        if k == 0:
            break
        mat = np.array([[c.scores[j] for c in alive] for j in range(k)])
        _, _, ranks = friedman(mat)
        for c, r in zip(alive, ranks):
            c.mean_rank = float(r)
        alive_ids = {c.id for c in alive}
        order = sorted(alive, key=lambda c: (c.mean_rank, _mean_over(c, k), c.id))
        elites = order[:n_elites]
        elites_history.append([c.id for c in elites])
        for c in sorted(cands, key=lambda c: c.id):
            leaderboard.append((iteration, c.id, c.id in alive_ids, c.mean_rank, c.mean_eo(), c.params))
        if spent == 0:
            break

    if not elites:
        raise TunerError("no race could be completed within the budget")
    best = elites[0]
    return TuneResult(
        best=best.config,
        best_id=best.id,
        best_params=best.params,
        leaderboard=leaderboard,
        runs_used=budget_runs - remaining,
        elites_by_iteration=elites_history,
        instances=instances,
    )


def _n_cached(c: Candidate, upto: int) -> int:
    return sum(1 for j in range(upto) if j in c.scores)


def _mean_over(c: Candidate, k: int) -> float:
    return float(np.mean([c.scores[j] for j in range(k)]))


def _pick_parent(elites: list[Candidate], rng: np.random.Generator) -> Candidate:
    n = len(elites)
    w = np.arange(n, 0, -1, dtype=float)
    return elites[int(rng.choice(n, p=w / w.sum()))]


def _params_of(cfg: AlgorithmConfig, space: SearchSpace) -> dict:
    """Best-effort parameter vector for a config supplied from outside the space."""
    es = cfg.optimizer.es_fraction
    levels = {v: k for k, v in OPTIMIZER_LEVELS.items()}
    t = cfg.toggles
    p = {
        "pop_size": cfg.pop_size,
        "optimizer": levels.get(es, "AbCD_ES50"),
        "phi1": cfg.optimizer.phi1,
        "phi2": cfg.optimizer.phi2,
        "r_cloud": cfg.optimizer.r_cloud,
        "multipopulation": t.multipopulation,
        "n_subpops": t.n_subpops,
        "exclusion": t.exclusion,
        "r_excl": t.r_excl,
        "anti_convergence": t.anti_convergence,
        "r_conv": t.r_conv,
        "local_search": t.local_search,
        "r_ls": t.r_ls,
        "etry": t.etry,
    }
    return _normalize(p)
