"""Independent reference computations used as cross-checks.

Nothing here imports the scheduling modules' arithmetic: each oracle
recomputes its quantity from raw logged numbers with plain loops and
``math.fsum``, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

REL_TOL = 1e-9


@dataclass
class OracleResult:
    name: str
    ok: bool
    detail: str = ""


def close(a: float, b: float, rel: float = REL_TOL) -> bool:
    if a == b:
        return True
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


# ---------------------------------------------------------------- formulas


def prefix_means(rounds: list[list[float]]) -> list[list[float]]:
    """Cumulative mean after each round, v^0 = 0 excluded from the count."""
    out = []
    for t in range(1, len(rounds) + 1):
        out.append([math.fsum(r[i] for r in rounds[:t]) / t for i in range(len(rounds[0]))])
    return out


def ratio(v: float, avg: float) -> float:
    return 1.0 if avg == 0 else v / avg


def member_ids(mask: int) -> list[int]:
    return [i for i in range(8) if mask & (1 << i)]


def reward_oracle(mask: int, t: int, v: list[float], vbar: list[float], lam: float) -> float:
    ids = member_ids(mask)
    per = [t * (ratio(v[i], vbar[i]) - lam * ratio(v[0], vbar[0])) for i in ids]
    return math.fsum(per) / len(ids) + t * len(ids)


def ucb_oracle(rewards: list[float], n: int, total: int, gamma: float) -> float:
    return math.fsum(rewards) / len(rewards) + gamma * math.sqrt(math.log(total) / n)


def replay_selection(reward_log: dict, n_arms: int, gamma: float, steps: int,
                     reward_fn) -> list[int]:
    """Selection sequence re-derived from scratch; ``reward_fn(mask, step)`` supplies rewards."""
    counts = {m: 0 for m in range(1, n_arms + 1)}
    hist = {m: [] for m in range(1, n_arms + 1)}
    seq = []
    for step in range(steps):
        fresh = [m for m in counts if counts[m] == 0]
        if fresh:
            chosen = fresh[0]
        else:
            total = sum(counts.values())
            best = None
            for m in sorted(counts):
                s = ucb_oracle(hist[m], counts[m], total, gamma)
                if best is None or s > best[0]:
                    best = (s, m)
            chosen = best[1]
        counts[chosen] += 1
        hist[chosen].append(reward_fn(chosen, step))
        seq.append(chosen)
    return seq


def energy_oracle(mask: int, execs: int, vbar: list[float], cap: int, state: str,
                  values=None, maxima=None) -> tuple[float, int]:
    ids = member_ids(mask)
    e = [cap if vbar[i] == 0 else execs / vbar[i] for i in ids]
    base = math.fsum(e) / len(ids)
    if state == "exploration":
        basis = base
    else:
        agg = math.fsum(ratio(values[i], vbar[i]) for i in ids) / len(ids)
        bonus = sum(1 for i in ids if values[i] >= maxima[i])
        basis = base * (agg + bonus)
    trials = math.ceil(basis) if basis < cap else cap
    return basis, max(1, trials)


# ---------------------------------------------------------------- Pareto


def brute_force_fronts(points) -> list[int]:
    """Front index per point by repeated peeling with pairwise dominance."""
    def dom(a, b):
        return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))

    remaining = set(range(len(points)))
    rank = [0] * len(points)
    level = 0
    while remaining:
        level += 1
        front = {p for p in remaining
                 if not any(dom(points[q], points[p]) for q in remaining if q != p)}
        for p in front:
            rank[p] = level
        remaining -= front
    return rank


def hypervolume_oracle(points, ref=None) -> float:
    """Inclusion-exclusion over subsets; exact but exponential (use <= 14 points)."""
    pts = [tuple(p) for p in points]
    if not pts:
        return 0.0
    m = len(pts[0])
    ref = ref or (0.0,) * m
    pts = [tuple(x - r for x, r in zip(p, ref)) for p in pts]
    pts = [p for p in pts if all(x > 0 for x in p)]
    total = 0.0
    for k in range(1, len(pts) + 1):
        sign = 1.0 if k % 2 else -1.0
        for combo in itertools.combinations(pts, k):
            total += sign * math.prod(min(p[d] for p in combo) for d in range(m))
    return total


# ---------------------------------------------------------------- checks


def _random_campaign_log(rounds: int, rng: random.Random, lam: float, gamma: float,
                         perturb: str | None):
    """Drive the real statistics/bandit/power code with random observations and log it."""
    from .mpmab import Bandit
    from .objectives import RoundStats
    from .power import FuzzState, assign_energy

    class _Seed:
        def __init__(self, values):
            self.id = 0
            self.best_objectives = values

    stats = RoundStats(3)
    bandit = Bandit(3, gamma * (1.5 if perturb == "ucb" else 1.0))
    log = []
    for _ in range(rounds):
        t = stats.round_id
        mask, scores = bandit.select(t)
        k = rng.randint(0, 12)
        obs = [[rng.uniform(50, 20000), float(rng.randint(0, 4096)), float(rng.randint(0, 48))]
               for _ in range(k)]
        for o in obs:
            stats.record_execution(o)
        seed_vals = [rng.uniform(0, 20000), float(rng.randint(0, 4096)), float(rng.randint(0, 48))]
        energies = {st: assign_energy(_Seed(seed_vals), st, stats, mask, 1024)
                    for st in FuzzState}
        pre = {"execs": stats.execs_at_close, "vbar": list(stats.cumulative_avg),
               "max": list(stats.per_objective_max)}
        stats.close_round()
        reward = bandit.record(mask, stats, lam)
        log.append({"mask": mask, "scores": scores, "obs": obs, "seed": seed_vals,
                    "energy": {st.value: (e.basis, e.trials) for st, e in energies.items()},
                    "pre": pre, "vbar": list(stats.cumulative_avg), "reward": reward})
    return log


def check_formulas(rounds: int = 1000, seed: int = 0, lam: float = 0.10, gamma: float = 0.01,
                   perturb: str | None = None) -> list[OracleResult]:
    rng = random.Random(seed)
    log = _random_campaign_log(rounds, rng, lam, gamma, perturb)
    results = []

    per_round = [[math.fsum(o[i] for o in e["obs"]) / len(e["obs"]) if e["obs"] else 0.0
                  for i in range(3)] for e in log]
    # incremental fsum prefix so 1000 rounds stay fast
    sums = [[] for _ in range(3)]
    bad = []
    for t, e in enumerate(log, start=1):
        for i in range(3):
            sums[i].append(per_round[t - 1][i])
            ref = math.fsum(sums[i]) / t
            if not close(ref, e["vbar"][i]):
                bad.append((t, i, ref, e["vbar"][i]))
    results.append(OracleResult("prefix-mean", not bad, f"{len(bad)} mismatches"))

    bad = []
    vbars = [e["vbar"] for e in log]
    for t, e in enumerate(log, start=1):
        ref = reward_oracle(e["mask"], t, per_round[t - 1], vbars[t - 1], lam)
        if not close(ref, e["reward"]):
            bad.append((t, ref, e["reward"]))
    results.append(OracleResult("reward", not bad, f"{len(bad)} mismatches"))

    rewards = {}
    counts = {m: 0 for m in range(1, 8)}
    bad = []
    for t, e in enumerate(log, start=1):
        fresh = [m for m in range(1, 8) if counts[m] == 0]
        if fresh:
            expect = fresh[0]
        else:
            total = sum(counts.values())
            scores = {m: ucb_oracle(rewards[m], counts[m], total, gamma) for m in range(1, 8)}
            expect = max(range(1, 8), key=lambda m: (scores[m], -m))
            for m in range(1, 8):
                if not close(scores[m], e["scores"][m]):
                    bad.append((t, "score", m))
                    break
        if expect != e["mask"]:
            bad.append((t, "mask", expect, e["mask"]))
        counts[e["mask"]] += 1
        rewards.setdefault(e["mask"], []).append(e["reward"])
    results.append(OracleResult("ucb-replay", not bad,
                                f"{len(bad)} mismatches" + (f", first {bad[0]}" if bad else "")))

    bad = []
    for t, e in enumerate(log, start=1):
        pre = e["pre"]
        for state in ("exploration", "exploitation"):
            basis, trials = energy_oracle(e["mask"], pre["execs"], pre["vbar"], 1024, state,
                                          e["seed"], pre["max"])
            got_basis, got_trials = e["energy"][state]
            if not close(basis, got_basis) or trials != got_trials:
                bad.append((t, state, basis, got_basis))
    results.append(OracleResult("energy", not bad, f"{len(bad)} mismatches"))
    return results


def check_dominance(instances: int = 20, n: int = 200, m: int = 4, seed: int = 0) -> OracleResult:
    from .nic import Individual, non_dominated_sort

    rng = random.Random(seed)
    for k in range(instances):
        pts = [tuple(rng.randint(0, 12) for _ in range(m)) for _ in range(n)]
        pop = [Individual(b"x", p, p) for p in pts]
        non_dominated_sort(pop)
        if [ind.rank for ind in pop] != brute_force_fronts(pts):
            return OracleResult("dominance", False, f"instance {k} differs")
    return OracleResult("dominance", True, f"{instances} instances of {n}x{m}")


def check_hypervolume(instances: int = 50, seed: int = 0) -> OracleResult:
    from .nic import hypervolume

    rng = random.Random(seed)
    for k in range(instances):
        m = rng.randint(1, 4)
        pts = [tuple(float(rng.randint(0, 9)) for _ in range(m)) for _ in range(rng.randint(0, 9))]
        a, b = hypervolume(pts), hypervolume_oracle(pts)
        if not close(a, b, 1e-9) and abs(a - b) > 1e-9:
            return OracleResult("hypervolume", False, f"instance {k}: {a} != {b}")
    return OracleResult("hypervolume", True, f"{instances} instances")


def run_all(seed: int = 0, perturb: str | None = None, rounds: int = 1000) -> list[OracleResult]:
    return (check_formulas(rounds, seed, perturb=perturb)
            + [check_dominance(seed=seed), check_hypervolume(seed=seed)])
