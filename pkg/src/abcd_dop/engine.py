"""Assembles a configuration into a runnable optimizer and executes one run."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import components
from .config import AlgorithmConfig, ValidationError, validate
from .landscape import InstanceSpec, make_landscape
from .metrics import RunTrace, final_offline_error
from .optimizers import step_population
from .population import (
    BudgetExhausted,
    Evaluator,
    PopulationState,
    init_population,
    refresh_bests,
    reset_memories,
)


def algorithm_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


@dataclass
class RunResult:
    trace: RunTrace
    final_eo: float
    config_id: str
    instance_id: str
    seed: int
    wall_time: float
    evaluator: Evaluator | None = None


def iterate(cfg: AlgorithmConfig, ps: PopulationState, evaluator: Evaluator,
            rng: np.random.Generator, first: bool = False) -> bool:
    """One engine iteration in the fixed component order. Returns the detection flag."""
    t = cfg.toggles
    ls = evaluator.landscape
    changed = components.detect_change(ps, evaluator)
    if changed:
        reset_memories(ps, evaluator)
    if t.local_search and (changed or not t.local_search_on_change_only):
        components.local_search(ps, t.r_ls, t.etry, evaluator, rng)

    step_population(ps, cfg.optimizer, rng, (ls.lower, ls.upper))
    f = evaluator.evaluate_many(ps.positions)
    ps.current_fit = f
    better = f > ps.pbest_fit
    ps.pbest_fit = np.where(better, f, ps.pbest_fit)
    ps.pbest_pos[better] = ps.positions[better]
    refresh_bests(ps)

    if t.exclusion:
        components.apply_exclusion(ps, t.r_excl, evaluator, rng)
    if t.anti_convergence:
        components.apply_anti_convergence(ps, t.r_conv, evaluator, rng)
    return changed


def run(config: AlgorithmConfig, spec: InstanceSpec, ne: int,
        keep_evaluator: bool = False) -> RunResult:
    """Execute one run of ``config`` on ``spec`` with a budget of ``ne`` evaluations.

    The landscape stream is seeded from ``spec.seed`` and the algorithm stream
    from ``config.seed``; the two never share state.
    """
    validate(config)
    if ne < config.pop_size:
        raise ValidationError(f"budget ne={ne} is smaller than pop_size={config.pop_size}")
    start = time.perf_counter()
    ls = make_landscape(spec)
    evaluator = Evaluator(ls, ne)
    rng = algorithm_rng(config.seed)
    ps = init_population(config.pop_size, config.n_subpops, config.optimizer.es_fraction,
                         evaluator, rng)
    try:
        while not evaluator.exhausted:
            iterate(config, ps, evaluator, rng)
    except BudgetExhausted:
        pass
    trace = evaluator.trace
    return RunResult(
        trace=trace,
        final_eo=final_offline_error(trace),
        config_id=config.name,
        instance_id=spec.instance_id,
        seed=config.seed,
        wall_time=time.perf_counter() - start,
        evaluator=evaluator if keep_evaluator else None,
    )
