"""Objective-combination selection: combination rewards and UCB1 scores.

A combination is an integer bitmask over objective ids; bit ``i`` set means
objective ``i`` is a member.  The empty mask is not an arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .objectives import RoundStats, objective_reward

DEFAULT_GAMMA = 0.01


def all_combinations(n_objectives: int) -> list[int]:
    return list(range(1, 1 << n_objectives))


def members(mask: int) -> tuple[int, ...]:
    if mask <= 0:
        raise ValueError("empty objective combination")
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def combo_size(mask: int) -> int:
    return len(members(mask))


def combo_label(mask: int, names=("speed", "stack", "cmp")) -> str:
    return "+".join(names[i] if i < len(names) else f"o{i}" for i in members(mask))


def combination_reward(mask: int, stats: RoundStats, lam: float) -> float:
    """R(C_l, t): mean member reward plus t * L."""
    ids = members(mask)
    if max(ids) >= stats.n_objectives:
        raise ValueError(f"combination {mask:#b} references unknown objectives")
    t = stats.closed_rounds
    size = len(ids)
    return sum(objective_reward(stats, i, lam) for i in ids) / size + t * size


@dataclass
class CombinationStats:
    mask: int
    n: int = 0
    rewards: list[float] = field(default_factory=list)

    @property
    def avg_reward(self) -> float:
        if not self.rewards:
            return 0.0
        return sum(self.rewards) / len(self.rewards)


def ucb_score(cs: CombinationStats, total_selections: int, gamma: float) -> float:
    if cs.n < 1:
        raise ValueError(f"combination {cs.mask} has never been selected; use the pioneer stage")
    return cs.avg_reward + gamma * math.sqrt(math.log(total_selections) / cs.n)


def score_all(arms: list[CombinationStats], gamma: float) -> dict[int, float]:
    """UCB score per mask; NaN for arms still waiting for their pioneer pull."""
    total = sum(a.n for a in arms)
    return {a.mask: (ucb_score(a, total, gamma) if a.n else math.nan) for a in arms}


def select_combination(arms: list[CombinationStats], t: int, gamma: float) -> int:
    """Pick the arm for round ``t`` and count the pull.

    Unpulled arms go first in ascending mask order; afterwards the maximum
    UCB score wins, ties to the smaller mask.
    """
    pending = [a for a in arms if a.n == 0]
    if pending:
        chosen = min(pending, key=lambda a: a.mask)
    else:
        scores = score_all(arms, gamma)
        chosen = min(arms, key=lambda a: (-scores[a.mask], a.mask))
    chosen.n += 1
    return chosen.mask


class Bandit:
    """One arm per nonempty objective combination."""

    def __init__(self, n_objectives: int, gamma: float = DEFAULT_GAMMA) -> None:
        self.n_objectives = n_objectives
        self.gamma = gamma
        self.arms = [CombinationStats(m) for m in all_combinations(n_objectives)]

    def arm(self, mask: int) -> CombinationStats:
        return self.arms[mask - 1]

    @property
    def in_pioneer_stage(self) -> bool:
        return any(a.n == 0 for a in self.arms)

    def select(self, t: int) -> tuple[int, dict[int, float]]:
        scores = score_all(self.arms, self.gamma)
        return select_combination(self.arms, t, self.gamma), scores

    def record(self, mask: int, stats: RoundStats, lam: float) -> float:
        reward = combination_reward(mask, stats, lam)
        self.arm(mask).rewards.append(reward)
        return reward

    def to_dict(self) -> dict:
        return {
            "n_objectives": self.n_objectives,
            "gamma": self.gamma,
            "arms": [{"mask": a.mask, "n": a.n, "rewards": list(a.rewards)} for a in self.arms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Bandit":
        b = cls(d["n_objectives"], d["gamma"])
        b.arms = [CombinationStats(a["mask"], a["n"], list(a["rewards"])) for a in d["arms"]]
        return b
