"""Power schedule: fuzzing state and per-seed energy under a combination."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .mpmab import members
from .objectives import RoundStats, safe_ratio

DEFAULT_ENERGY_CAP = 1024


class FuzzState(str, Enum):
    EXPLORATION = "exploration"
    EXPLOITATION = "exploitation"


@dataclass(frozen=True)
class EnergyAssignment:
    seed_id: int
    state: FuzzState
    basis: float
    trials: int


def average_objective_energy(stats: RoundStats, i: int, cap: int = DEFAULT_ENERGY_CAP) -> float:
    """Execs(t) / v̄^t_i; the energy cap when the objective has no history."""
    avg = stats.cumulative_avg[i]
    if avg == 0:
        return float(cap)
    return stats.execs_at_close / avg


def combination_energy(stats: RoundStats, mask: int, cap: int = DEFAULT_ENERGY_CAP) -> float:
    ids = members(mask)
    return sum(average_objective_energy(stats, i, cap) for i in ids) / len(ids)


def aggregate_ratio(values: Sequence[float], stats: RoundStats, mask: int) -> float:
    """Mean over members of value_i / v̄^t_i (scale-free combination ratio)."""
    ids = members(mask)
    return sum(safe_ratio(values[i], stats.cumulative_avg[i]) for i in ids) / len(ids)


def max_bonus(values: Sequence[float], stats: RoundStats, mask: int) -> int:
    """Number of member objectives on which ``values`` ties or beats the running maximum."""
    return sum(1 for i in members(mask) if values[i] >= stats.per_objective_max[i])


def clamp_trials(basis: float, cap: int) -> int:
    return max(1, math.ceil(min(basis, cap)))


def assign_energy(seed, state: FuzzState, stats: RoundStats, mask: int,
                  cap: int = DEFAULT_ENERGY_CAP) -> EnergyAssignment:
    base = combination_energy(stats, mask, cap)
    if state is FuzzState.EXPLORATION:
        basis = base
    else:
        if seed.best_objectives is None:
            raise ValueError(f"seed {seed.id} was never executed; exploitation energy is undefined")
        values = seed.best_objectives
        basis = base * (aggregate_ratio(values, stats, mask) + max_bonus(values, stats, mask))
    return EnergyAssignment(seed.id, state, basis, clamp_trials(basis, cap))


def update_state(pool) -> FuzzState:
    """Exploration while any seed in the pool has never been fuzzed."""
    if not pool.seeds or pool.n_unfuzzed:
        return FuzzState.EXPLORATION
    return FuzzState.EXPLOITATION
