import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobsched.objectives import (
    ObjectiveSpec, RoundStats, objective_registry, objective_reward, safe_ratio,
    validate_registry,
)

finite = st.floats(min_value=0, max_value=1e6, allow_nan=False)


def test_registry_speed_first():
    reg = objective_registry()
    assert [o.name for o in reg] == ["speed", "stack", "cmp"]
    assert reg[0].is_speed and reg[0].id == 0
    validate_registry(reg)


@pytest.mark.parametrize("specs", [
    (),
    (ObjectiveSpec(0, "stack"),),
    (ObjectiveSpec(0, "speed", True), ObjectiveSpec(2, "cmp")),
    (ObjectiveSpec(0, "speed", True), ObjectiveSpec(1, "also-speed", True)),
])
def test_registry_rejects(specs):
    with pytest.raises(ValueError):
        validate_registry(specs)


def test_first_observation_is_the_mean():
    s = RoundStats(3)
    s.record_execution((10, 5, 3))
    assert s.per_round_avg == [10, 5, 3]
    assert s.execs_in_round == 1 and s.cumulative_execs == 1


def test_two_observations_average():
    s = RoundStats(3)
    s.record_execution((10, 0, 0))
    s.record_execution((20, 0, 0))
    assert s.per_round_avg[0] == 15


def test_length_mismatch():
    with pytest.raises(ValueError):
        RoundStats(3).record_execution((1, 2))


def test_cumulative_mean_counts_closed_rounds():
    s = RoundStats(1)
    s.record_execution((10,))
    s.close_round()
    s.record_execution((20,))
    s.close_round()
    assert s.cumulative_avg == [15]
    assert s.closed_rounds == 2 and s.round_id == 3


def test_all_zero_rounds():
    s = RoundStats(2)
    for _ in range(4):
        s.close_round()
    assert s.cumulative_avg == [0.0, 0.0]
    assert s.history == [[0.0, 0.0]] * 4


def test_empty_round_contributes_zero():
    s = RoundStats(1)
    s.record_execution((8,))
    s.close_round()
    s.close_round()
    assert s.cumulative_avg == [4.0]


@settings(max_examples=50)
@given(st.lists(st.lists(finite, min_size=1, max_size=5), min_size=1, max_size=50))
def test_prefix_mean_oracle(rounds):
    s = RoundStats(1)
    for t, obs in enumerate(rounds, start=1):
        for v in obs:
            s.record_execution((v,))
        s.close_round()
        means = [math.fsum(r) / len(r) for r in rounds[:t]]
        assert s.cumulative_avg[0] == pytest.approx(math.fsum(means) / t, rel=1e-9, abs=1e-12)


@settings(max_examples=50)
@given(st.lists(finite, min_size=1, max_size=100))
def test_round_mean_oracle(values):
    s = RoundStats(1)
    for v in values:
        s.record_execution((v,))
    assert s.per_round_avg[0] == pytest.approx(math.fsum(values) / len(values), rel=1e-9,
                                               abs=1e-12)
    assert s.per_objective_max[0] == max(values + [0.0])


def test_batch_equals_individual_records():
    a, b = RoundStats(2), RoundStats(2)
    obs = [(3.0, 1.0), (5.0, 7.0), (1.0, 2.0)]
    for o in obs:
        a.record_execution(o)
    b.record_batch(3, [9.0, 10.0], [5.0, 7.0])
    assert a.to_dict() == b.to_dict()


def test_execs_at_close_freezes():
    s = RoundStats(1)
    s.record_execution((1,))
    s.close_round()
    s.record_execution((1,))
    assert s.execs_at_close == 1 and s.cumulative_execs == 2


def _stats_with_ratios(t, ri, r0):
    """A stats object whose last round has ratio ri on objective 1 and r0 on speed."""
    s = RoundStats(2)
    s.history = [[1.0, 1.0]] * t
    s.cumulative_avg = [1.0, 1.0]
    s.history[-1] = [r0, ri]
    return s


def test_reward_example():
    s = _stats_with_ratios(5, 1.2, 1.0)
    assert objective_reward(s, 1, 0.1) == pytest.approx(5.5)


def test_speed_self_penalty():
    s = _stats_with_ratios(1, 1.0, 1.0)
    assert objective_reward(s, 0, 0.1) == pytest.approx(0.9)


def test_reward_needs_a_closed_round():
    with pytest.raises(ValueError):
        objective_reward(RoundStats(3), 0, 0.1)


def test_unknown_objective():
    s = _stats_with_ratios(1, 1.0, 1.0)
    with pytest.raises(ValueError):
        s.ratio(5)


def test_neutral_ratio():
    assert safe_ratio(7.0, 0.0) == 1.0
    assert safe_ratio(3.0, 2.0) == 1.5


@given(st.integers(1, 50), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0, 10))
def test_reward_homogeneous_in_t(t, ri, r0, lam):
    a = objective_reward(_stats_with_ratios(t, ri, r0), 1, lam)
    b = objective_reward(_stats_with_ratios(2 * t, ri, r0), 1, lam)
    assert b == pytest.approx(2 * a, rel=1e-9, abs=1e-9)


def test_round_trip():
    s = RoundStats(3)
    s.record_execution((1.0, 2.0, 3.0))
    s.close_round()
    assert RoundStats.from_dict(s.to_dict()) == s
