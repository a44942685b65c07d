import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abcd_dop.components import (
    apply_anti_convergence,
    apply_exclusion,
    detect_change,
    local_search,
)
from abcd_dop.landscape import InstanceSpec, apply_change, make_landscape

from .conftest import make_state, single_peak


def _landscape(d=5, k=10, seed=0):
    return make_landscape(InstanceSpec(dimensions=d, n_peaks=k, seed=seed))


def test_detect_static(rng):
    ps, ev = make_state(_landscape(), [10] * 10, rng)
    assert detect_change(ps, ev) is False
    assert ev.evals_used == 10


def test_detect_after_change(rng):
    ls = single_peak(50.0, 2.0, center=np.full(2, 50.0), d=2)
    ps, ev = make_state(ls, [1], rng, positions=np.full((1, 2), 50.0))
    apply_change(ls)
    assert detect_change(ps, ev) is True
    assert ps.sbest_fit[0] == 50.0  # memories untouched


def test_exclusion_close_pair(rng):
    ls = _landscape(d=2)
    pos = np.array([[10.0, 10.0], [10.05, 10.05]])
    ps, ev = make_state(ls, [1, 1], rng, positions=pos)
    worse = int(np.argmin(ps.sbest_fit))
    assert apply_exclusion(ps, 1.0, ev, rng) == [worse]
    assert ev.evals_used == 1


def test_exclusion_far_pair(rng):
    ls = _landscape(d=2)
    pos = np.array([[10.0, 10.0], [12.0, 10.0]])
    ps, ev = make_state(ls, [1, 1], rng, positions=pos)
    assert apply_exclusion(ps, 1.0, ev, rng) == []
    assert ev.evals_used == 0


def test_exclusion_three_close(rng):
    ls = single_peak(50.0, 1.0, center=np.zeros(2), d=2)
    # fitness falls with distance from the origin: subpop 0 best, 2 worst
    pos = np.array([[0.1, 0.0], [0.2, 0.0], [0.3, 0.0]])
    ps, ev = make_state(ls, [1, 1, 1], rng, positions=pos)
    # pairs: (0,1) -> 1 goes; (0,2) -> 2 goes; (1,2) skipped
    assert apply_exclusion(ps, 1.0, ev, rng) == [1, 2]
    assert np.array_equal(ps.positions[0], pos[0])


def test_exclusion_tie_hits_higher_id(rng):
    ls = single_peak(50.0, 1.0, center=np.zeros(2), d=2)
    pos = np.array([[1.0, 0.0], [0.0, 1.0]])
    ps, ev = make_state(ls, [1, 1], rng, positions=pos)
    assert apply_exclusion(ps, 5.0, ev, rng) == [1]


def test_anti_convergence_all_collapsed(rng):
    ls = _landscape()
    centers = rng.uniform(0, 100, size=(4, 5))
    pos = np.repeat(centers, 5, axis=0)
    ps, ev = make_state(ls, [5] * 4, rng, positions=pos)
    worst = int(np.argmin(ps.sbest_fit))
    assert apply_anti_convergence(ps, 1.0, ev, rng) == worst
    assert ev.evals_used == 5
    assert ps.diameters()[worst] > 1.0


def test_anti_convergence_needs_all(rng):
    ls = _landscape()
    centers = rng.uniform(0, 100, size=(4, 5))
    pos = np.repeat(centers, 5, axis=0)
    pos[0] += 10.0
    ps, ev = make_state(ls, [5] * 4, rng, positions=pos)
    assert apply_anti_convergence(ps, 1.0, ev, rng) is None
    assert ev.evals_used == 0


def test_reinit_diameter_monte_carlo(rng):
    ls = _landscape()
    hits = 0
    for _ in range(200):
        pos = np.repeat(rng.uniform(0, 100, size=(3, 5)), 10, axis=0)
        ps, ev = make_state(ls, [10] * 3, rng, positions=pos)
        s = apply_anti_convergence(ps, 1.0, ev, rng)
        hits += ps.diameters()[s] > 1.0
    assert hits == 200


def test_local_search_zero_tries(rng):
    ps, ev = make_state(_landscape(), [10], rng)
    g = ps.gbest_fit
    assert local_search(ps, 10.0, 0, ev, rng) == 0
    assert ev.evals_used == 0 and ps.gbest_fit == g


def test_local_search_charges_etry(rng):
    ps, ev = make_state(_landscape(), [10, 10], rng)
    local_search(ps, 20.0, 20, ev, rng)
    assert ev.evals_used == 20


def test_local_search_improves_off_apex(rng):
    ls = single_peak(50.0, 1.0, center=np.full(3, 50.0), d=3)
    ps, ev = make_state(ls, [3], rng, positions=np.full((3, 3), 40.0))
    before = ps.gbest_fit
    pos_before = ps.positions.copy()
    local_search(ps, 20.0, 500, ev, rng)
    assert ps.gbest_fit > before
    assert np.array_equal(ps.positions, pos_before)
    assert ps.pbest_fit.max() == ps.gbest_fit
    assert ps.sbest_fit[0] == ps.gbest_fit


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**6), m=st.integers(2, 6), r=st.floats(0.0, 150.0))
def test_exclusion_pairs_acted_on(seed, m, r):
    g = np.random.default_rng(seed)
    ls = _landscape(d=3, seed=seed)
    ps, ev = make_state(ls, [2] * m, g)
    start = ps.sbest_pos.copy()
    fit = ps.sbest_fit.copy()
    done = apply_exclusion(ps, r, ev, g)
    for i in range(m):
        for j in range(i + 1, m):
            if np.linalg.norm(start[i] - start[j]) < r:
                assert i in done or j in done
    assert int(np.argmax(fit)) not in done
    assert ps.pop_size == 2 * m
