"""Constriction PSO, cloud sampling and the role-split hybrid step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIFORM, GAUSSIAN = "uniform", "gaussian"


@dataclass(frozen=True)
class OptimizerParams:
    chi: float = 0.729
    phi1: float = 2.05
    phi2: float = 2.05
    r_cloud: float = 1.0
    es_fraction: float = 0.0
    cloud: str = UNIFORM


def pso_step(x, v, pbest, sbest, params: OptimizerParams, rng,
             bounds: tuple[float, float] = (-np.inf, np.inf)):
    """Constriction-factor velocity and position update.

    Works on a single individual (1-D arrays) or a block of rows. Components
    pushed past ``bounds`` are clamped and their velocity zeroed. Returns the
    new ``(position, velocity)``.
    """
    x = np.asarray(x, dtype=float)
    u1 = rng.random(x.shape)
    u2 = rng.random(x.shape)
    v_new = params.chi * (v + params.phi1 * u1 * (pbest - x) + params.phi2 * u2 * (sbest - x))
    x_new = x + v_new
    lo, hi = bounds
    out = (x_new < lo) | (x_new > hi)
    if out.any():
        x_new = np.clip(x_new, lo, hi)
        v_new = np.where(out, 0.0, v_new)
    return x_new, v_new


def uniform_ball(n: int, d: int, radius: float, rng) -> np.ndarray:
    """``n`` offsets drawn uniformly from the d-ball of the given radius."""
    g = rng.standard_normal((n, d))
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    r = radius * rng.random((n, 1)) ** (1.0 / d)
    return g / norm * r


def es_sample(sbest, r_cloud: float, rng, n: int | None = None,
              bounds: tuple[float, float] = (-np.inf, np.inf),
              cloud: str = UNIFORM) -> np.ndarray:
    """Draw positions around ``sbest`` inside a cloud of radius ``r_cloud``.

    ``sbest`` is either one point (with optional ``n`` for several draws) or a
    block of centres, one per draw. ``cloud="gaussian"`` uses an isotropic
    normal with standard deviation ``r_cloud`` instead of the ball.
    """
    if r_cloud < 0:
        raise ValueError("r_cloud must be >= 0")
    centers = np.asarray(sbest, dtype=float)
    single = centers.ndim == 1 and n is None
    if centers.ndim == 1:
        centers = np.broadcast_to(centers, (1 if n is None else n, centers.size))
    m, d = centers.shape
    if cloud == UNIFORM:
        offsets = uniform_ball(m, d, r_cloud, rng)
    elif cloud == GAUSSIAN:
        offsets = r_cloud * rng.standard_normal((m, d))
    else:
        raise ValueError(f"unknown cloud shape {cloud!r}")
    out = np.clip(centers + offsets, bounds[0], bounds[1])
    return out[0] if single else out


def step_population(ps, params: OptimizerParams, rng, bounds) -> None:
    """Move every individual once: PSO rows by velocity, ES rows by cloud draw.

    Positions and velocities are updated in place; evaluation is left to the
    caller.
    """
    sbest_rows = ps.sbest_pos[ps.subpop_of]
    pso = ~ps.is_es
    if pso.any():
        x, v = pso_step(ps.positions[pso], ps.velocities[pso], ps.pbest_pos[pso],
                        sbest_rows[pso], params, rng, bounds)
        ps.positions[pso] = x
        ps.velocities[pso] = v
    if ps.is_es.any():
        ps.positions[ps.is_es] = es_sample(sbest_rows[ps.is_es], params.r_cloud, rng,
                                           bounds=bounds, cloud=params.cloud)
        ps.velocities[ps.is_es] = 0.0
