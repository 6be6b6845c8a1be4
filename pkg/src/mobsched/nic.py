"""In-loop NSGA-II over the shared seed pool.

NIC evolves a small population sampled from the pool toward the Pareto
front of the active objective combination.  Offspring that reach new
coverage are admitted to the pool immediately; the final rank-1 front is
appended to the pool as well.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import mutation
from .corpus import Origin, SeedPool
from .kernels import MAX_INPUT_LEN, crowding_distances, nondominated_ranks, objective_values
from .mpmab import members
from .simtarget import ExecutionRecord

GRADIENT_EPS = 1e-9


@dataclass
class Individual:
    data: bytes
    objectives: tuple  # active-combination members only
    full: tuple  # every objective, for telemetry
    record: Optional[ExecutionRecord] = None
    seed_id: Optional[int] = None
    rank: int = 0
    crowding: float = 0.0


@dataclass
class NicConfig:
    population_fraction: float = 0.10
    pop_min: int = 4
    pop_max: int = 256
    generations: int = 100
    start_threshold: float = -0.15
    budget_fraction: float = 0.06
    enabled: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.population_fraction <= 1:
            raise ValueError("population_fraction must be in (0, 1]")
        if self.pop_min < 2 or self.pop_min % 2 or self.pop_max % 2 or self.pop_max < self.pop_min:
            raise ValueError("pop_min/pop_max must be even with 2 <= pop_min <= pop_max")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0 <= self.budget_fraction <= 1:
            raise ValueError("budget_fraction must be in [0, 1]")


@dataclass
class NicResult:
    front: list
    executions: int
    generations: int
    admitted: list = field(default_factory=list)  # (seed id, sha1) of new-coverage inputs
    pareto_added: list = field(default_factory=list)
    log: list = field(default_factory=list)


def gradient(prev: float, cur: float, eps: float = GRADIENT_EPS) -> float:
    return (cur - prev) / max(prev, eps)


def should_start(prev: float, cur: float, threshold: float = -0.15,
                 eps: float = GRADIENT_EPS) -> bool:
    """True when the relative change between two consecutive values drops below ``threshold``."""
    return gradient(prev, cur, eps) < threshold


def population_size(pool_size: int, cfg: NicConfig) -> int:
    n = math.floor(cfg.population_fraction * pool_size + 0.5)
    n = min(max(n, cfg.pop_min), cfg.pop_max)
    return n + (n % 2)


def make_individual(data: bytes, full: Sequence[float], mask: int, record=None,
                    seed_id: Optional[int] = None) -> Individual:
    return Individual(bytes(data), tuple(full[i] for i in members(mask)), tuple(full),
                      record, seed_id)


def sample_population(pool: SeedPool, cfg: NicConfig, rng, mask: int) -> list:
    if not len(pool):
        raise ValueError("NIC needs a non-empty seed pool")
    size = population_size(len(pool), cfg)
    if len(pool) >= size:
        chosen = rng.sample(range(len(pool)), size)
    else:
        chosen = [rng.randrange(len(pool)) for _ in range(size)]
    out = []
    for sid in chosen:
        seed = pool.get(sid)
        if seed.best_objectives is None:
            raise ValueError(f"seed {sid} was never executed")
        out.append(make_individual(seed.data, seed.best_objectives, mask, seed_id=sid))
    return out


def non_dominated_sort(pop: list) -> list:
    """Fronts (lists of individuals) in rank order; assigns ``rank`` in place."""
    if not pop:
        return []
    ranks = nondominated_ranks([ind.objectives for ind in pop])
    fronts: list[list] = [[] for _ in range(max(ranks))]
    for ind, r in zip(pop, ranks):
        ind.rank = r
        fronts[r - 1].append(ind)
    return fronts


def assign_crowding(front: list) -> None:
    for ind, d in zip(front, crowding_distances([ind.objectives for ind in front])):
        ind.crowding = d


def select_next_parents(combined: list, n: int) -> list:
    if len(combined) < n:
        raise ValueError(f"need at least {n} individuals, got {len(combined)}")
    chosen: list = []
    for front in non_dominated_sort(combined):
        assign_crowding(front)
        if len(chosen) + len(front) <= n:
            chosen.extend(front)
        else:
            # stable: equal crowding keeps population order
            ordered = sorted(front, key=lambda ind: -ind.crowding)
            chosen.extend(ordered[: n - len(chosen)])
        if len(chosen) == n:
            break
    return chosen


def rank_one(pop: list) -> list:
    fronts = non_dominated_sort(pop)
    return fronts[0] if fronts else []


def hypervolume(points: Sequence[Sequence[float]], ref: Optional[Sequence[float]] = None) -> float:
    """Volume dominated by ``points`` above ``ref`` (default origin), maximisation."""
    pts = [tuple(p) for p in points]
    if not pts:
        return 0.0
    m = len(pts[0])
    ref = tuple(ref) if ref is not None else (0.0,) * m
    pts = [tuple(x - r for x, r in zip(p, ref)) for p in pts]
    pts = [p for p in pts if all(x > 0 for x in p)]
    return _hv(pts, m)


def _hv(pts: list, m: int) -> float:
    if not pts:
        return 0.0
    if m == 1:
        return max(p[0] for p in pts)
    pts = sorted(pts, key=lambda p: p[m - 1], reverse=True)
    total = 0.0
    for i, p in enumerate(pts):
        nxt = pts[i + 1][m - 1] if i + 1 < len(pts) else 0.0
        depth = p[m - 1] - nxt
        if depth > 0:
            total += depth * _hv([q[: m - 1] for q in pts[: i + 1]], m - 1)
    return total


def _front_log(gen: int, fronts: list, used: int) -> dict:
    return {
        "generation": gen,
        "front_sizes": [len(f) for f in fronts],
        "rank1": sorted(list(ind.objectives) for ind in fronts[0]) if fronts else [],
        "executions": used,
    }


def run_nic(pool: SeedPool, mask: int, cfg: NicConfig, rng, budget: int, *, target,
            stats, credits, round_id: int = 0, n_objectives: int = 3,
            max_len: Optional[int] = None) -> NicResult:
    """Evolve a sampled population for up to ``cfg.generations`` generations.

    ``target.run(data)`` returns ``(edges, cost, stack, cmp)`` or ``None``
    (skipped input).  Every execution is recorded into ``stats``.
    """
    if max_len is None:
        max_len = MAX_INPUT_LEN
    pop = sample_population(pool, cfg, rng, mask)
    n = len(pop)
    ids = members(mask)
    result = NicResult(front=[], executions=0, generations=0)
    result.log.append(_front_log(0, non_dominated_sort(pop), 0))

    for gen in range(1, cfg.generations + 1):
        if budget - result.executions < n:
            break
        order = list(range(n))
        rng.shuffle(order)
        offspring = []
        for k in range(0, n, 2):
            pa, pb = pop[order[k]], pop[order[k + 1]]
            ca, cb = mutation.crossover(pa.data, pb.data, rng)
            for child, parent, other in ((ca, pa, pb), (cb, pb, pa)):
                op = mutation.pick_operator(credits, mask, rng)
                pos = mutation.pick_position(credits, mask, len(child), rng)
                bucket = mutation.position_bucket(pos, len(child))
                credits.note_selection(mask, op, bucket)
                child = mutation.apply_operator(op, child, pos, rng, other.data, max_len)
                raw = target.run(child)
                result.executions += 1
                if raw is None:
                    continue
                record = ExecutionRecord(*raw)
                values = objective_values(record.exec_cost, record.stack_bytes,
                                          record.cmp_matched, n_objectives)
                stats.record_execution(values)
                mutation.credit_update(credits, mask, op, bucket,
                                       mutation.improved_any(values, parent.full, ids))
                seed = pool.add_if_new_coverage(child, record, values, Origin.NIC, round_id)
                sid = None
                if seed is not None:
                    sid = seed.id
                    result.admitted.append((seed.id, hashlib.sha1(seed.data).hexdigest()))
                offspring.append(make_individual(child, values, mask, record, sid))
        result.generations = gen
        pop = select_next_parents(pop + offspring, n)
        result.log.append(_front_log(gen, non_dominated_sort(pop), result.executions))

    result.front = rank_one(pop)
    for ind in result.front:
        if ind.record is None:
            continue  # sampled straight from the pool
        seed = pool.add_pareto(ind.data, ind.record, ind.full, round_id)
        if seed is not None:
            result.pareto_added.append(seed.id)
    return result
