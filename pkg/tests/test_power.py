import math
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mobsched.corpus import Origin, SeedPool
from mobsched.objectives import RoundStats
from mobsched.power import (
    FuzzState, aggregate_ratio, assign_energy, average_objective_energy, clamp_trials,
    combination_energy, update_state,
)
from mobsched.simtarget import ExecutionRecord


def stats(execs, avgs, maxima=None):
    s = RoundStats(len(avgs))
    s.execs_at_close = execs
    s.cumulative_avg = list(avgs)
    s.per_objective_max = list(maxima or [1e18] * len(avgs))
    return s


def seed(values, sid=0):
    return SimpleNamespace(id=sid, best_objectives=list(values))


def test_objective_energy_quotient():
    assert average_objective_energy(stats(10000, [500.0]), 0) == 20


def test_zero_average_gives_cap():
    assert average_objective_energy(stats(10000, [0.0]), 0) == 1024
    assert average_objective_energy(stats(10000, [0.0]), 0, cap=64) == 64


def test_combination_energy_mean():
    assert combination_energy(stats(100, [5.0, 10.0]), 0b11) == 15


def test_singleton_combination_energy():
    s = stats(900, [3.0, 9.0])
    assert combination_energy(s, 0b10) == average_objective_energy(s, 1)


def test_exploration_trials():
    ea = assign_energy(seed([0, 0]), FuzzState.EXPLORATION, stats(100, [10.0, 10.0]), 0b11)
    assert (ea.basis, ea.trials) == (10, 10)


def test_exploitation_example():
    # E=10, aggregate ratio 1.5, seed holds the max of one of the two members
    s = stats(100, [10.0, 10.0], maxima=[20.0, 99.0])
    ea = assign_energy(seed([20.0, 10.0]), FuzzState.EXPLOITATION, s, 0b11)
    assert aggregate_ratio([20.0, 10.0], s, 0b11) == 1.5
    assert ea.basis == pytest.approx(25)
    assert ea.trials == 25


def test_average_seed_fixed_point():
    s = stats(100, [10.0, 10.0], maxima=[50.0, 50.0])
    explore = assign_energy(seed([10, 10]), FuzzState.EXPLORATION, s, 0b11)
    exploit = assign_energy(seed([10, 10]), FuzzState.EXPLOITATION, s, 0b11)
    assert exploit.basis == explore.basis == 10


def test_exploitation_needs_values():
    with pytest.raises(ValueError):
        assign_energy(SimpleNamespace(id=3, best_objectives=None), FuzzState.EXPLOITATION,
                      stats(1, [1.0]), 1)


def test_max_tie_is_inclusive():
    s = stats(10, [5.0], maxima=[7.0])
    ea = assign_energy(seed([7.0]), FuzzState.EXPLOITATION, s, 1)
    assert ea.basis == pytest.approx(2 * (7 / 5 + 1))


@given(st.floats(0, 1e7))
def test_trials_bounds(basis):
    t = clamp_trials(basis, 1024)
    assert 1 <= t <= 1024
    assert t == max(1, math.ceil(min(basis, 1024)))


@given(st.integers(1, 10 ** 6), st.lists(st.floats(0.01, 1e5), min_size=3, max_size=3),
       st.integers(1, 7))
def test_linear_in_execs(execs, avgs, mask):
    a = combination_energy(stats(execs, avgs), mask)
    b = combination_energy(stats(2 * execs, avgs), mask)
    assert b == pytest.approx(2 * a, rel=1e-12)


@given(st.lists(st.floats(0.01, 1e5), min_size=3, max_size=3),
       st.lists(st.floats(0, 1e5), min_size=3, max_size=3),
       st.lists(st.floats(0, 1e5), min_size=3, max_size=3), st.integers(1, 7))
def test_exploitation_dominates_when_above_average(avgs, values, maxima, mask):
    s = stats(5000, avgs, maxima)
    if aggregate_ratio(values, s, mask) < 1:
        return
    lo = assign_energy(seed(values), FuzzState.EXPLORATION, s, mask)
    hi = assign_energy(seed(values), FuzzState.EXPLOITATION, s, mask)
    assert hi.basis >= lo.basis and hi.trials >= lo.trials


def _record():
    return ExecutionRecord((1, 2), 60, 0, 0)


def test_state_transitions():
    pool = SeedPool()
    assert update_state(pool) is FuzzState.EXPLORATION
    a = pool.add_initial(b"a", _record(), [1.0, 0.0, 0.0])
    assert update_state(pool) is FuzzState.EXPLORATION
    pool.mark_fuzzed(a)
    assert update_state(pool) is FuzzState.EXPLOITATION
    pool.admit(b"b", ExecutionRecord((1, 2, 3), 65, 0, 0), [1.0, 0.0, 0.0], Origin.MAIN)
    assert update_state(pool) is FuzzState.EXPLORATION
