"""Objective registry and per-round / cumulative objective statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

SPEED = 0


@dataclass(frozen=True)
class ObjectiveSpec:
    id: int
    name: str
    is_speed: bool = False


DEFAULT_OBJECTIVES = (
    ObjectiveSpec(0, "speed", True),
    ObjectiveSpec(1, "stack", False),
    ObjectiveSpec(2, "cmp", False),
)


def objective_registry(n: int = 3) -> tuple[ObjectiveSpec, ...]:
    """The first ``n`` built-in objectives; speed is always objective 0."""
    if not 1 <= n <= len(DEFAULT_OBJECTIVES):
        raise ValueError(f"number of objectives must be in 1..{len(DEFAULT_OBJECTIVES)}, got {n}")
    return DEFAULT_OBJECTIVES[:n]


def validate_registry(specs: Sequence[ObjectiveSpec]) -> None:
    if not specs:
        raise ValueError("at least one objective is required")
    if [s.id for s in specs] != list(range(len(specs))):
        raise ValueError("objective ids must be dense 0..N-1")
    speed = [s for s in specs if s.is_speed]
    if len(speed) != 1 or speed[0].id != SPEED:
        raise ValueError("exactly one speed objective is required and it must have id 0")


def safe_ratio(value: float, average: float) -> float:
    """``value / average`` with the neutral ratio 1 when there is no history."""
    if average == 0:
        return 1.0
    return value / average


@dataclass
class RoundStats:
    """Objective statistics over the round clock.

    ``round_id`` is the currently open round.  ``history`` holds the closed
    per-round averages v^1..v^t; ``cumulative_avg`` is their mean (the empty
    round 0 contributes nothing).  ``execs_at_close`` is Execs(t) at the last
    round boundary.
    """

    n_objectives: int = 3
    round_id: int = 1
    execs_in_round: int = 0
    cumulative_execs: int = 0
    execs_at_close: int = 0
    round_sum: list[float] = field(default_factory=list)
    history: list[list[float]] = field(default_factory=list)
    history_execs: list[int] = field(default_factory=list)
    cumulative_sum: list[float] = field(default_factory=list)
    cumulative_avg: list[float] = field(default_factory=list)
    per_objective_max: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = self.n_objectives
        if n < 1:
            raise ValueError("n_objectives must be >= 1")
        for name in ("round_sum", "cumulative_sum", "cumulative_avg", "per_objective_max"):
            if not getattr(self, name):
                setattr(self, name, [0.0] * n)

    @property
    def closed_rounds(self) -> int:
        return len(self.history)

    @property
    def per_round_avg(self) -> list[float]:
        if self.execs_in_round == 0:
            return [0.0] * self.n_objectives
        return [s / self.execs_in_round for s in self.round_sum]

    @property
    def last_round_avg(self) -> list[float]:
        if not self.history:
            return [0.0] * self.n_objectives
        return self.history[-1]

    def _check(self, values: Sequence[float]) -> None:
        if len(values) != self.n_objectives:
            raise ValueError(
                f"objective vector has length {len(values)}, expected {self.n_objectives}"
            )

    def record_execution(self, obs: Sequence[float]) -> None:
        self._check(obs)
        for i, v in enumerate(obs):
            self.round_sum[i] += v
            if v > self.per_objective_max[i]:
                self.per_objective_max[i] = v
        self.execs_in_round += 1
        self.cumulative_execs += 1

    def record_batch(self, count: int, sums: Sequence[float], maxima: Sequence[float]) -> None:
        """Fold in ``count`` executions summarised by their sums and maxima."""
        if count == 0:
            return
        self._check(sums)
        self._check(maxima)
        for i in range(self.n_objectives):
            self.round_sum[i] += sums[i]
            if maxima[i] > self.per_objective_max[i]:
                self.per_objective_max[i] = maxima[i]
        self.execs_in_round += count
        self.cumulative_execs += count

    def close_round(self) -> list[float]:
        """Freeze v^t, update the cumulative mean and open the next round."""
        v = self.per_round_avg
        self.history.append(v)
        self.history_execs.append(self.execs_in_round)
        t = len(self.history)
        for i in range(self.n_objectives):
            self.cumulative_sum[i] += v[i]
            self.cumulative_avg[i] = self.cumulative_sum[i] / t
        self.execs_at_close = self.cumulative_execs
        self.round_id = t + 1
        self.execs_in_round = 0
        self.round_sum = [0.0] * self.n_objectives
        return v

    def ratio(self, i: int) -> float:
        """v^t_i / v̄^t_i for the last closed round."""
        if not 0 <= i < self.n_objectives:
            raise ValueError(f"unknown objective id {i}")
        return safe_ratio(self.last_round_avg[i], self.cumulative_avg[i])

    def csv_row(self) -> list:
        """round, per-round averages, cumulative averages, execs (last closed round)."""
        return [self.closed_rounds, *self.last_round_avg, *self.cumulative_avg,
                self.history_execs[-1] if self.history_execs else 0]

    def to_dict(self) -> dict:
        return {
            "n_objectives": self.n_objectives,
            "round_id": self.round_id,
            "execs_in_round": self.execs_in_round,
            "cumulative_execs": self.cumulative_execs,
            "execs_at_close": self.execs_at_close,
            "round_sum": list(self.round_sum),
            "history": [list(h) for h in self.history],
            "history_execs": list(self.history_execs),
            "cumulative_sum": list(self.cumulative_sum),
            "cumulative_avg": list(self.cumulative_avg),
            "per_objective_max": list(self.per_objective_max),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundStats":
        return cls(**d)


def objective_reward(stats: RoundStats, i: int, lam: float) -> float:
    """R(O_i, t) = t * (v^t_i / v̄^t_i - lam * v^t_0 / v̄^t_0) for the last closed round."""
    t = stats.closed_rounds
    if t < 1:
        raise ValueError("objective_reward needs at least one closed round")
    return t * (stats.ratio(i) - lam * stats.ratio(SPEED))
