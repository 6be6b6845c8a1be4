import random

import pytest

from mobsched.corpus import Origin, Seed, SeedPool, is_good_seed, load_pool, save_pool
from mobsched.kernels import hit_bucket
from mobsched.objectives import RoundStats
from mobsched.simtarget import ExecutionRecord, execute


def rec(edges, cost=60):
    return ExecutionRecord(tuple(edges), cost, 0, 0)


def test_first_record_is_new():
    pool = SeedPool()
    s = pool.add_if_new_coverage(b"x", rec([5]), [1.0, 0, 0], Origin.MAIN)
    assert s is not None and s.origin is Origin.MAIN
    assert pool.coverage.get(5) == 1


def test_replay_is_rejected():
    pool = SeedPool()
    pool.add_if_new_coverage(b"x", rec([5, 6]), [1.0, 0, 0], Origin.MAIN)
    assert pool.add_if_new_coverage(b"y", rec([5, 6]), [1.0, 0, 0], Origin.MAIN) is None
    assert len(pool) == 1


def test_higher_bucket_is_new():
    pool = SeedPool()
    pool.add_if_new_coverage(b"x", rec([5]), [1.0, 0, 0], Origin.MAIN)
    assert pool.add_if_new_coverage(b"y", rec([5, 5, 5, 5]), [1.0, 0, 0], Origin.NIC)
    assert pool.coverage.get(5) == hit_bucket(4)


@pytest.mark.parametrize("count,bucket", [
    (1, 1), (2, 2), (3, 3), (4, 4), (7, 4), (8, 5), (15, 5), (16, 6), (31, 6), (32, 7),
    (127, 7), (128, 8), (5000, 8)])
def test_hit_buckets(count, bucket):
    assert hit_bucket(count) == bucket


def test_novelty_matches_oracle(shallow):
    rng = random.Random(3)
    pool = SeedPool()
    seen: dict[int, int] = {}
    expected = []
    for i in range(1000):
        data = bytes(rng.choice(b"MZPKGIF8\n<\x00ab") for _ in range(rng.randint(1, 24)))
        record = execute(shallow, data)
        counts: dict[int, int] = {}
        for e in record.edges:
            counts[e] = counts.get(e, 0) + 1
        new = False
        for e, c in counts.items():
            b = 1 if c == 1 else 2 if c == 2 else 3 if c == 3 else 4 if c < 8 else \
                5 if c < 16 else 6 if c < 32 else 7 if c < 128 else 8
            if b > seen.get(e, 0):
                seen[e] = b
                new = True
        admitted = pool.add_if_new_coverage(data, record, record.objectives(), Origin.MAIN)
        assert (admitted is not None) == new
        if new:
            expected.append(data)
    assert pool.coverage.to_sparse() == seen
    assert len(pool) == len(set(expected))


def test_pick_single_seed(rng):
    pool = SeedPool()
    s = pool.add_initial(b"a", rec([1]), [1.0, 0, 0])
    assert all(pool.pick_next_seed(rng) is s for _ in range(20))


def test_pick_empty_pool(rng):
    with pytest.raises(ValueError):
        SeedPool().pick_next_seed(rng)


def test_favored_monte_carlo(rng):
    pool = SeedPool()
    fav = pool.add_initial(b"a", rec([1], cost=10), [1.0, 0, 0])
    # same edge, slower and longer: never favored
    other = pool.admit(b"bbbb", rec([1], cost=90), [1.0, 0, 0], Origin.MAIN)
    assert pool.favored == {fav.id}
    picks = [pool.pick_next_seed(rng).id for _ in range(10_000)]
    assert picks.count(fav.id) / len(picks) >= 0.85
    assert other.id in picks


def test_all_favored_cycles_in_order(rng):
    pool = SeedPool()
    for i in range(4):
        pool.add_initial(bytes([65 + i]), rec([i + 1]), [1.0, 0, 0])
    assert [pool.pick_next_seed(rng).id for _ in range(8)] == [0, 1, 2, 3] * 2


def _stats(avgs):
    s = RoundStats(len(avgs))
    s.cumulative_avg = list(avgs)
    return s


def test_good_seed_boundaries():
    st = _stats([10.0, 4.0, 2.0])
    at_avg = Seed(0, b"a", [10.0, 4.0, 2.0])
    double = Seed(1, b"b", [20.0, 8.0, 4.0])
    assert not is_good_seed(at_avg, st, 7)
    assert is_good_seed(double, st, 7)
    with pytest.raises(ValueError):
        is_good_seed(Seed(2, b"c", None), st, 7)


def test_good_fraction_oracle():
    rng = random.Random(5)
    st = _stats([rng.uniform(1, 100) for _ in range(3)])
    seeds = [Seed(i, bytes([i]), [rng.uniform(0, 200) for _ in range(3)]) for i in range(60)]
    for mask in range(1, 8):
        ids = [i for i in range(3) if mask >> i & 1]
        want = sum(1 for s in seeds
                   if sum(s.best_objectives[i] / st.cumulative_avg[i] for i in ids) / len(ids) > 1)
        assert sum(is_good_seed(s, st, mask) for s in seeds) == want


def test_observe_keeps_best():
    s = Seed(0, b"a", [1.0, 5.0, 0.0])
    s.observe([3.0, 2.0, 1.0])
    assert s.best_objectives == [3.0, 5.0, 1.0]


def test_pareto_dedupe():
    pool = SeedPool()
    pool.add_initial(b"a", rec([1]), [1.0, 0, 0])
    assert pool.add_pareto(b"a", rec([1]), [1.0, 0, 0], 3) is None
    s = pool.add_pareto(b"b", rec([1]), [1.0, 0, 0], 3)
    assert s.origin is Origin.NIC and s.discovered_round == 3


def test_persistence_round_trip(tmp_path, shallow):
    pool = SeedPool()
    for i, data in enumerate([b"MZ", b"MZ..PK", b"<<<<"]):
        r = execute(shallow, data)
        pool.add_if_new_coverage(data, r, r.objectives(), Origin.MAIN, i)
    pool.mark_fuzzed(pool.get(0))
    save_pool(pool, tmp_path / "q")
    assert sorted(p.name for p in (tmp_path / "q").iterdir())[-1] == "index.json"
    back = load_pool(tmp_path / "q")
    assert [s.data for s in back.seeds] == [s.data for s in pool.seeds]
    assert back.coverage.to_sparse() == pool.coverage.to_sparse()
    assert back.n_unfuzzed == pool.n_unfuzzed
    again = SeedPool.from_dict(pool.to_dict())
    assert again.to_dict() == pool.to_dict()


def test_replaying_seeds_reproduces_coverage(shallow):
    rng = random.Random(9)
    pool = SeedPool()
    for _ in range(300):
        data = bytes(rng.choice(b"MZPKGI<\n") for _ in range(rng.randint(1, 16)))
        r = execute(shallow, data)
        pool.add_if_new_coverage(data, r, r.objectives(), Origin.MAIN)
    fresh = SeedPool()
    for s in pool.seeds:
        fresh.coverage.merge(execute(shallow, s.data).edges)
    assert fresh.coverage.to_sparse() == pool.coverage.to_sparse()
