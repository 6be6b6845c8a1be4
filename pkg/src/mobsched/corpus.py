"""Shared seed pool with bucketed edge coverage and favored-seed selection."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .kernels import CoverageMap
from .power import aggregate_ratio

SKIP_NON_FAVORED = 0.9


class Origin(str, Enum):
    INITIAL = "initial"
    MAIN = "main"
    NIC = "nic"


@dataclass
class Seed:
    id: int
    data: bytes
    best_objectives: Optional[list[float]]
    coverage: tuple = ()
    exec_cost: int = 0
    fuzz_count: int = 0
    origin: Origin = Origin.MAIN
    discovered_round: int = 0

    def observe(self, values) -> None:
        """Keep the per-objective best over repeated executions."""
        if self.best_objectives is None:
            self.best_objectives = list(values)
        else:
            self.best_objectives = [max(a, b) for a, b in zip(self.best_objectives, values)]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "origin": self.origin.value,
            "round": self.discovered_round,
            "objectives": self.best_objectives,
            "coverage": [list(c) for c in self.coverage],
            "exec_cost": self.exec_cost,
            "fuzz_count": self.fuzz_count,
        }


class SeedPool:
    """Ordered seed list Q plus the global edge -> max-bucket map."""

    def __init__(self, map_size: int = 65536) -> None:
        self.seeds: list[Seed] = []
        self.coverage = CoverageMap(map_size)
        self.cursor = 0
        self.n_unfuzzed = 0
        self._by_bytes: dict[bytes, int] = {}
        self._top_rated: dict[int, int] = {}
        self._favored: Optional[set[int]] = None

    def __len__(self) -> int:
        return len(self.seeds)

    def __contains__(self, data: bytes) -> bool:
        return data in self._by_bytes

    def get(self, seed_id: int) -> Seed:
        return self.seeds[seed_id]

    @property
    def favored(self) -> set[int]:
        if self._favored is None:
            self._favored = set(self._top_rated.values())
        return self._favored

    def _score(self, seed: Seed) -> int:
        return seed.exec_cost * len(seed.data)

    def _append(self, data: bytes, record, values, origin: Origin, round_id: int) -> Seed:
        seed = Seed(
            id=len(self.seeds),
            data=bytes(data),
            best_objectives=list(values) if values is not None else None,
            coverage=tuple(self.coverage.classify(record.edges)) if record is not None else (),
            exec_cost=record.exec_cost if record is not None else 0,
            origin=origin,
            discovered_round=round_id,
        )
        self.seeds.append(seed)
        self._by_bytes[seed.data] = seed.id
        self.n_unfuzzed += 1
        self._rate(seed)
        return seed

    def _rate(self, seed: Seed) -> None:
        score = self._score(seed)
        for edge, _bucket in seed.coverage:
            top = self._top_rated.get(edge)
            if top is None or score < self._score(self.seeds[top]):
                self._top_rated[edge] = seed.id
                self._favored = None

    def _restore(self, seed: Seed) -> None:
        if seed.id != len(self.seeds):
            raise ValueError("seed ids must be dense and ordered")
        self.seeds.append(seed)
        self._by_bytes[seed.data] = seed.id
        if seed.fuzz_count == 0:
            self.n_unfuzzed += 1
        self._rate(seed)

    def add_initial(self, data: bytes, record, values, round_id: int = 0) -> Optional[Seed]:
        """Initial seeds join unconditionally (duplicates by content are dropped)."""
        if not data:
            raise ValueError("seeds must be non-empty")
        if data in self._by_bytes:
            return None
        self.coverage.merge(record.edges)
        return self._append(data, record, values, Origin.INITIAL, round_id)

    def add_if_new_coverage(self, data: bytes, record, values, origin: Origin,
                            round_id: int = 0) -> Optional[Seed]:
        if not self.coverage.merge(record.edges):
            return None
        return self.admit(data, record, values, origin, round_id)

    def admit(self, data: bytes, record, values, origin: Origin, round_id: int = 0) -> Seed:
        """Add an input whose novelty was already merged into the coverage map."""
        existing = self._by_bytes.get(bytes(data))
        if existing is not None:
            seed = self.seeds[existing]
            seed.observe(values)
            return seed
        return self._append(data, record, values, origin, round_id)

    def add_pareto(self, data: bytes, record, values, round_id: int) -> Optional[Seed]:
        if bytes(data) in self._by_bytes:
            return None
        return self._append(data, record, values, Origin.NIC, round_id)

    def mark_fuzzed(self, seed: Seed) -> None:
        if seed.fuzz_count == 0:
            self.n_unfuzzed -= 1
        seed.fuzz_count += 1

    def pick_next_seed(self, rng) -> Seed:
        """Cycle the queue; favored seeds always run, others are skipped 90% of the time."""
        if not self.seeds:
            raise ValueError("cannot pick from an empty seed pool")
        favored = self.favored
        while True:
            seed = self.seeds[self.cursor]
            self.cursor = (self.cursor + 1) % len(self.seeds)
            if seed.id in favored or rng.random() >= SKIP_NON_FAVORED:
                return seed

    def to_dict(self) -> dict:
        return {
            "seeds": [dict(s.to_dict(), data=s.data.hex()) for s in self.seeds],
            "coverage": {str(k): v for k, v in self.coverage.to_sparse().items()},
            "cursor": self.cursor,
            "map_size": self.coverage.size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedPool":
        pool = cls(d["map_size"])
        for s in d["seeds"]:
            seed = Seed(
                id=s["id"],
                data=bytes.fromhex(s["data"]),
                best_objectives=s["objectives"],
                coverage=tuple(tuple(c) for c in s["coverage"]),
                exec_cost=s["exec_cost"],
                fuzz_count=s["fuzz_count"],
                origin=Origin(s["origin"]),
                discovered_round=s["round"],
            )
            pool._restore(seed)
        pool.coverage.load_sparse({int(k): v for k, v in d["coverage"].items()})
        pool.cursor = d["cursor"]
        return pool


def is_good_seed(seed: Seed, stats, mask: int) -> bool:
    """True when the seed's combination ratio strictly exceeds the running average."""
    if seed.best_objectives is None:
        raise ValueError(f"seed {seed.id} was never executed")
    return aggregate_ratio(seed.best_objectives, stats, mask) > 1.0


def save_pool(pool: SeedPool, directory) -> Path:
    """Write one file per seed plus ``index.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for seed in pool.seeds:
        name = f"id_{seed.id:06d}_{seed.origin.value}"
        (directory / name).write_bytes(seed.data)
        entry = seed.to_dict()
        entry["file"] = name
        entry["edges"] = sorted({e for e, _ in seed.coverage})
        index.append(entry)
    tmp = directory / "index.json.tmp"
    tmp.write_text(json.dumps(index, indent=1, sort_keys=True))
    os.replace(tmp, directory / "index.json")
    return directory


def load_pool(directory, map_size: int = 65536) -> SeedPool:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    pool = SeedPool(map_size)
    coverage: dict[int, int] = {}
    for entry in index:
        data = (directory / entry["file"]).read_bytes()
        seed = Seed(
            id=len(pool.seeds),
            data=data,
            best_objectives=entry["objectives"],
            coverage=tuple(tuple(c) for c in entry["coverage"]),
            exec_cost=entry["exec_cost"],
            fuzz_count=entry["fuzz_count"],
            origin=Origin(entry["origin"]),
            discovered_round=entry["round"],
        )
        pool._restore(seed)
        for edge, bucket in seed.coverage:
            if bucket > coverage.get(edge, 0):
                coverage[edge] = bucket
    pool.coverage.load_sparse(coverage)
    return pool
