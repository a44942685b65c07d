from __future__ import annotations

import numpy as np
import pytest

from abcd_dop.landscape import InstanceSpec, LandscapeState, make_landscape
from abcd_dop.population import Evaluator, PopulationState, refresh_bests

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class ForcedRNG:
    """Stand-in random stream returning a fixed value for uniform draws."""

    def __init__(self, value: float = 1.0):
        self.value = value

    def random(self, shape=None):
        return np.full(shape, self.value) if shape is not None else self.value


def single_peak(height=50.0, width=1.0, center=None, d=2, **spec_kw) -> LandscapeState:
    spec = InstanceSpec(dimensions=d, n_peaks=1, **spec_kw)
    ls = make_landscape(spec)
    ls.heights[:] = height
    ls.widths[:] = width
    ls.centers[0] = np.zeros(d) if center is None else center
    return ls


def make_state(ls: LandscapeState, sizes: list[int], rng: np.random.Generator,
               positions: np.ndarray | None = None, budget: int = 10**9):
    """Population over ``ls`` with memories equal to current positions (no budget charge)."""
    n = sum(sizes)
    d = ls.dimensions
    if positions is None:
        positions = rng.uniform(ls.lower, ls.upper, size=(n, d))
    f = ls.evaluate(positions)
    ps = PopulationState(
        positions=positions.copy(),
        velocities=np.zeros((n, d)),
        pbest_pos=positions.copy(),
        pbest_fit=np.asarray(f, dtype=float).copy(),
        current_fit=np.asarray(f, dtype=float).copy(),
        is_es=np.zeros(n, dtype=bool),
        sizes=list(sizes),
        sbest_pos=np.zeros((len(sizes), d)),
        sbest_fit=np.zeros(len(sizes)),
        gbest_pos=np.zeros(d),
    )
    refresh_bests(ps)
    return ps, Evaluator(ls, budget)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
