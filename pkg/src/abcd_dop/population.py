"""Individuals, subpopulations, best-memory bookkeeping and the evaluation budget.

The population is stored struct-of-arrays: row ``i`` of every array belongs to
individual ``i`` and subpopulations are contiguous row blocks. Row order is the
individual id, so argmax-style selections break ties by lowest id.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .landscape import LandscapeState, apply_change, evaluate, global_optimum_value
from .metrics import RunTrace

PSO, ES = "PSO", "ES"


class ConfigError(ValueError):
    pass


class BudgetExhausted(Exception):
    pass


class Evaluator:
    """Budgeted fitness evaluator that also owns the change schedule.

    Every call charges one evaluation per point and appends one trace record
    per point. A change is applied immediately before evaluation number
    ``k * change_frequency + 1``. The trace's best fitness is the running
    maximum of everything evaluated in the current environment.
    """

    def __init__(self, landscape: LandscapeState, budget: int, trace: RunTrace | None = None):
        self.landscape = landscape
        self.budget = budget
        self.trace = trace if trace is not None else RunTrace(budget)
        self.evals_used = 0
        self.env_evals = 0
        self.env_best = -np.inf
        self._next_change = landscape.change_frequency
        self._optimum = global_optimum_value(landscape)

    @property
    def remaining(self) -> int:
        return self.budget - self.evals_used

    @property
    def exhausted(self) -> bool:
        return self.evals_used >= self.budget

    def _maybe_change(self) -> None:
        if self.evals_used == self._next_change:
            apply_change(self.landscape)
            self._next_change += self.landscape.change_frequency
            self._optimum = global_optimum_value(self.landscape)
            self.env_evals = 0
            self.env_best = -np.inf

    def __call__(self, x: np.ndarray) -> float:
        return float(self.evaluate_many(np.asarray(x, dtype=float)[None, :])[0])

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate rows of ``xs`` in order.

        Raises BudgetExhausted after evaluating (and recording) the prefix that
        fits in the budget.
        """
        xs = np.asarray(xs, dtype=float)
        n = len(xs)
        out = np.empty(n)
        done = 0
        while done < n:
            if self.exhausted:
                raise BudgetExhausted
            self._maybe_change()
            chunk = min(n - done, self._next_change - self.evals_used, self.remaining)
            f = evaluate(self.landscape, xs[done:done + chunk])
            out[done:done + chunk] = f
            best = np.maximum.accumulate(np.maximum(f, self.env_best))
            self.trace.record_block(best, self._optimum, self.landscape.env_index)
            self.env_best = float(best[-1])
            self.evals_used += chunk
            self.env_evals += chunk
            done += chunk
        return out


def partition_subpops(pop_size: int, n_subpops: int) -> list[int]:
    if n_subpops < 1:
        raise ConfigError("n_subpops must be >= 1")
    if n_subpops > pop_size:
        raise ConfigError(f"n_subpops ({n_subpops}) exceeds pop_size ({pop_size})")
    base, extra = divmod(pop_size, n_subpops)
    return [base + 1 if i < extra else base for i in range(n_subpops)]


def assign_roles(size: int, es_fraction: float) -> np.ndarray:
    """Boolean ES mask for one subpopulation; the lowest ids get the ES role."""
    if not 0.0 <= es_fraction <= 1.0:
        raise ConfigError("es_fraction must be in [0, 1]")
    n_es = int(np.floor(es_fraction * size + 0.5))
    mask = np.zeros(size, dtype=bool)
    mask[:n_es] = True
    return mask


@dataclass
class Individual:
    """Read-only view of one row of a PopulationState."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float
    current_fitness: float
    role: str


@dataclass
class Subpopulation:
    id: int
    members: list[Individual]
    sbest_position: np.ndarray
    sbest_fitness: float


@dataclass
class PopulationState:
    positions: np.ndarray
    velocities: np.ndarray
    pbest_pos: np.ndarray
    pbest_fit: np.ndarray
    current_fit: np.ndarray
    is_es: np.ndarray
    sizes: list[int]
    sbest_pos: np.ndarray
    sbest_fit: np.ndarray
    gbest_pos: np.ndarray
    gbest_fit: float = -np.inf
    gbest_index: int = 0

    def __post_init__(self):
        self.starts = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.intp)
        self.subpop_of = np.repeat(np.arange(len(self.sizes)), self.sizes)

    @property
    def pop_size(self) -> int:
        return len(self.positions)

    @property
    def n_subpops(self) -> int:
        return len(self.sizes)

    def members(self, s: int) -> slice:
        start = int(self.starts[s])
        return slice(start, start + self.sizes[s])

    def individual(self, i: int) -> Individual:
        return Individual(
            id=i,
            position=self.positions[i].copy(),
            velocity=self.velocities[i].copy(),
            pbest_position=self.pbest_pos[i].copy(),
            pbest_fitness=float(self.pbest_fit[i]),
            current_fitness=float(self.current_fit[i]),
            role=ES if self.is_es[i] else PSO,
        )

    def subpopulation(self, s: int) -> Subpopulation:
        sl = self.members(s)
        return Subpopulation(
            id=s,
            members=[self.individual(i) for i in range(sl.start, sl.stop)],
            sbest_position=self.sbest_pos[s].copy(),
            sbest_fitness=float(self.sbest_fit[s]),
        )

    def diameters(self) -> np.ndarray:
        """Maximum pairwise member distance per subpopulation."""
        out = np.zeros(self.n_subpops)
        for s in range(self.n_subpops):
            p = self.positions[self.members(s)]
            if len(p) > 1:
                diff = p[:, None, :] - p[None, :, :]
                out[s] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max())
        return out


def refresh_bests(ps: PopulationState) -> PopulationState:
    """Recompute S_best per subpopulation and P_best from individual memories."""
    fit = ps.pbest_fit
    seg_max = np.maximum.reduceat(fit, ps.starts)
    ids = np.arange(ps.pop_size)
    is_max = fit == seg_max[ps.subpop_of]
    # lowest id among the maxima of each block
    winners = np.minimum.reduceat(np.where(is_max, ids, ps.pop_size), ps.starts)
    ps.sbest_fit = fit[winners].copy()
    ps.sbest_pos = ps.pbest_pos[winners].copy()
    g = int(winners[int(np.argmax(ps.sbest_fit))])
    ps.gbest_index = g
    ps.gbest_fit = float(fit[g])
    ps.gbest_pos = ps.pbest_pos[g].copy()
    return ps


def init_population(pop_size: int, n_subpops: int, es_fraction: float,
                    evaluator: Evaluator, rng: np.random.Generator) -> PopulationState:
    sizes = partition_subpops(pop_size, n_subpops)
    ls = evaluator.landscape
    d = ls.dimensions
    positions = rng.uniform(ls.lower, ls.upper, size=(pop_size, d))
    is_es = np.concatenate([assign_roles(n, es_fraction) for n in sizes])
    ps = PopulationState(
        positions=positions,
        velocities=np.zeros((pop_size, d)),
        pbest_pos=positions.copy(),
        pbest_fit=np.full(pop_size, -np.inf),
        current_fit=np.full(pop_size, -np.inf),
        is_es=is_es,
        sizes=sizes,
        sbest_pos=np.zeros((n_subpops, d)),
        sbest_fit=np.full(n_subpops, -np.inf),
        gbest_pos=np.zeros(d),
    )
    f = evaluator.evaluate_many(positions)
    ps.current_fit = f
    ps.pbest_fit = f.copy()
    return refresh_bests(ps)


def reset_memories(ps: PopulationState, evaluator: Evaluator) -> PopulationState:
    """Reevaluate every individual and replace its memory with the fresh value."""
    f = evaluator.evaluate_many(ps.positions)
    ps.current_fit = f
    ps.pbest_pos = ps.positions.copy()
    ps.pbest_fit = f.copy()
    return refresh_bests(ps)


def reinitialize_subpop(ps: PopulationState, s: int, evaluator: Evaluator,
                        rng: np.random.Generator) -> None:
    """Scatter subpopulation ``s`` uniformly over the box and rebuild its memories.

    Leaves P_best untouched; callers refresh once after all reinitializations.
    """
    sl = ps.members(s)
    ls = evaluator.landscape
    n = sl.stop - sl.start
    pos = rng.uniform(ls.lower, ls.upper, size=(n, ls.dimensions))
    ps.positions[sl] = pos
    ps.velocities[sl] = 0.0
    ps.pbest_pos[sl] = pos
    f = evaluator.evaluate_many(pos)
    ps.current_fit[sl] = f
    ps.pbest_fit[sl] = f
    k = int(np.argmax(f))
    ps.sbest_fit[s] = f[k]
    ps.sbest_pos[s] = pos[k]
