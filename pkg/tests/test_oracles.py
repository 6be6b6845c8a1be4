import random

import pytest
from hypothesis import given, settings, strategies as st

from mobsched import oracles


def test_formula_oracles_agree():
    results = oracles.check_formulas(rounds=300, seed=3)
    assert all(r.ok for r in results), [(r.name, r.detail) for r in results]


def test_perturbed_ucb_is_caught():
    results = {r.name: r for r in oracles.check_formulas(rounds=300, seed=3, perturb="ucb")}
    assert not results["ucb-replay"].ok
    assert results["reward"].ok and results["energy"].ok


def test_dominance_and_hypervolume():
    assert oracles.check_dominance(instances=5).ok
    assert oracles.check_hypervolume(instances=20).ok


def test_brute_force_fronts_example():
    assert oracles.brute_force_fronts([(1, 1), (2, 2), (0, 3), (2, 1)]) == [3, 1, 1, 2]


def test_hypervolume_oracle_examples():
    assert oracles.hypervolume_oracle([(2, 3)]) == 6
    assert oracles.hypervolume_oracle([(2, 1), (1, 2)]) == 3
    assert oracles.hypervolume_oracle([(1, 1, 1), (2, 2, 2)]) == 8


def test_reward_oracle_example():
    # two members at twice their average, speed ratio 1, t=3, lambda=0.1
    v, vbar = [5.0, 8.0, 6.0], [5.0, 4.0, 3.0]
    expect = 3 * (2 - 0.1) + 3 * 2
    assert oracles.reward_oracle(6, 3, v, vbar, 0.1) == pytest.approx(expect)


def test_replay_selection_pioneers_in_order():
    seq = oracles.replay_selection({}, 7, 0.01, 7, lambda m, s: 0.0)
    assert seq == [1, 2, 3, 4, 5, 6, 7]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1e6), min_size=3, max_size=3), min_size=1, max_size=20))
def test_prefix_means_last_is_mean(rows):
    last = oracles.prefix_means(rows)[-1]
    for i in range(3):
        assert last[i] == pytest.approx(sum(r[i] for r in rows) / len(rows), rel=1e-9, abs=1e-9)


def test_energy_oracle_cap():
    basis, trials = oracles.energy_oracle(1, 100, [0.0, 1.0, 1.0], 1024, "exploration")
    assert basis == 1024 and trials == 1024
    basis, trials = oracles.energy_oracle(2, 10, [1.0, 4.0, 1.0], 1024, "exploration")
    assert basis == 2.5 and trials == 3
