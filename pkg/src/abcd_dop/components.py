"""Togglable dynamic components: change detection, exclusion, anti-convergence, local search."""
from __future__ import annotations

import numpy as np

from .optimizers import uniform_ball
from .population import Evaluator, PopulationState, refresh_bests, reinitialize_subpop

CHANGE_TOLERANCE = 1e-9


def detect_change(ps: PopulationState, evaluator: Evaluator) -> bool:
    """Reevaluate every S_best and report whether any stored value is stale.

    Stored memories are left alone.
    """
    f = evaluator.evaluate_many(ps.sbest_pos)
    return bool(np.any(np.abs(f - ps.sbest_fit) > CHANGE_TOLERANCE))


def apply_exclusion(ps: PopulationState, r_excl: float, evaluator: Evaluator,
                    rng: np.random.Generator) -> list[int]:
    """One pass over subpopulation pairs whose bests are closer than ``r_excl``.

    For each such pair (ascending ``(i, j)``) the worse subpopulation is
    reinitialised, unless one of the two was already reinitialised in this
    pass. Distances and fitness are taken at the start of the pass. Returns the
    reinitialised subpopulation ids.
    """
    m = ps.n_subpops
    if m < 2:
        return []
    pos = ps.sbest_pos.copy()
    fit = ps.sbest_fit.copy()
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    close = np.argwhere(np.triu(dist < r_excl, k=1))
    if len(close) == 0:
        return []
    done: list[int] = []
    for i, j in close:
        if i in done or j in done:
            continue
        # ties go against the higher id
        loser = int(j) if fit[j] <= fit[i] else int(i)
        done.append(loser)
    for s in done:
        reinitialize_subpop(ps, s, evaluator, rng)
    refresh_bests(ps)
    return done


def apply_anti_convergence(ps: PopulationState, r_conv: float, evaluator: Evaluator,
                           rng: np.random.Generator) -> int | None:
    """Reinitialise the worst subpopulation when every subpopulation has converged.

    A subpopulation is converged when its diameter is below ``r_conv``.
    Returns the reinitialised id, or None.
    """
    if ps.n_subpops < 2:
        return None
    if not np.all(ps.diameters() < r_conv):
        return None
    worst = int(np.argmin(ps.sbest_fit))
    reinitialize_subpop(ps, worst, evaluator, rng)
    refresh_bests(ps)
    return worst


def local_search(ps: PopulationState, r_ls: float, etry: int, evaluator: Evaluator,
                 rng: np.random.Generator) -> int:
    """Probe ``etry`` points around P_best and keep strict improvements.

    An improvement overwrites the memory of the individual that owns P_best
    (its position and velocity are not touched), and so also its S_best.
    Returns the number of accepted probes.
    """
    if etry <= 0:
        return 0
    ls = evaluator.landscape
    center = ps.gbest_pos.copy()
    probes = np.clip(center + uniform_ball(etry, ls.dimensions, r_ls, rng), ls.lower, ls.upper)
    f = evaluator.evaluate_many(probes)
    accepted = 0
    owner = ps.gbest_index
    s = int(ps.subpop_of[owner])
    for k in range(etry):
        if f[k] > ps.gbest_fit:
            accepted += 1
            ps.gbest_fit = float(f[k])
            ps.gbest_pos = probes[k].copy()
    if accepted:
        ps.pbest_fit[owner] = ps.gbest_fit
        ps.pbest_pos[owner] = ps.gbest_pos
        ps.sbest_fit[s] = ps.gbest_fit
        ps.sbest_pos[s] = ps.gbest_pos
    return accepted
