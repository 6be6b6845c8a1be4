"""Campaign driver: round clock, combination selection, power schedule,
havoc main loop, NIC triggering, telemetry, snapshot/resume.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import kernels
from .corpus import Origin, SeedPool, is_good_seed, save_pool
from .mpmab import DEFAULT_GAMMA, Bandit, combo_label, members
from .mutation import CreditTable
from .nic import NicConfig, gradient, run_nic, should_start
from .objectives import RoundStats, objective_registry, safe_ratio
from .power import (DEFAULT_ENERGY_CAP, FuzzState, aggregate_ratio, assign_energy,
                    combination_energy, max_bonus, update_state)
from .simtarget import ExecutionRecord, TargetSpec, parse_target_spec

log = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
DEFAULT_LAMBDA = 0.10


class CampaignAborted(RuntimeError):
    def __init__(self, message: str, snapshot: Optional[Path]) -> None:
        super().__init__(message)
        self.snapshot = snapshot


class SnapshotError(ValueError):
    pass


@dataclass
class CampaignConfig:
    n_objectives: int = 3
    lam: float = DEFAULT_LAMBDA
    gamma: float = DEFAULT_GAMMA
    round_budget: int = 1000
    total_rounds: int = 1440
    seed: int = 0
    nic: NicConfig = field(default_factory=NicConfig)
    energy_cap: int = DEFAULT_ENERGY_CAP
    stack_pow2: int = 4  # havoc stacks 1..2**(stack_pow2-1) operators
    max_input_len: int = kernels.MAX_INPUT_LEN
    round_seconds: Optional[float] = None  # wall-clock rounds instead of execution budgets
    max_execs: Optional[int] = None

    def __post_init__(self) -> None:
        if isinstance(self.nic, dict):
            self.nic = NicConfig(**self.nic)
        objective_registry(self.n_objectives)
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite value >= 0, got {self.lam}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a finite value >= 0, got {self.gamma}")
        if self.round_budget < 1:
            raise ValueError("round_budget must be >= 1")
        if self.total_rounds < 0:
            raise ValueError("total_rounds must be >= 0")
        if self.energy_cap < 1:
            raise ValueError("energy_cap must be >= 1")
        if not 1 <= self.stack_pow2 <= 8:
            raise ValueError("stack_pow2 must be in 1..8")
        if self.round_seconds is not None and self.round_seconds <= 0:
            raise ValueError("round_seconds must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


ROUND_FIELDS = (
    ["round", "mask", "combination", "state"]
    + [f"v_{o.name}" for o in objective_registry(3)]
    + [f"avg_{o.name}" for o in objective_registry(3)]
    + ["execs", "main_execs", "nic_execs", "cumulative_execs", "energy_assignments",
       "energy_mean", "nic_fired", "pool_size", "edges", "good_seed_fraction", "reward"]
)
SELECTION_FIELDS = ["round", "mask", "combination", "pioneer"] + [
    f"score_{m}" for m in range(1, 8)]
ENERGY_FIELDS = ["round", "seed", "mask", "state", "exploration_basis", "aggregate_ratio",
                 "max_bonus", "basis", "trials", "executed", "new_seeds"]


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _fresh_telemetry() -> dict:
    return {"rounds": [], "selections": [], "energy": [], "nic": []}


class Campaign:
    """One fuzzing campaign against a synthetic target or an external harness."""

    def __init__(self, cfg: CampaignConfig, spec: Optional[TargetSpec] = None, *,
                 executor=None, seeds=None, cmp_total: Optional[int] = None) -> None:
        if spec is None and executor is None:
            raise ValueError("a target spec or an executor is required")
        self.cfg = cfg
        self.spec = spec
        self.executor = executor if executor is not None else spec.kernel
        self.cmp_total = cmp_total if cmp_total is not None else (spec.cmp_total if spec else None)
        self.n = cfg.n_objectives
        self.rng = random.Random(cfg.seed)
        self.stats = RoundStats(self.n)
        self.bandit = Bandit(self.n, cfg.gamma)
        self.pool = SeedPool()
        self.credits = CreditTable()
        self.state = FuzzState.EXPLORATION
        self.mask = 0
        self.main_execs = 0
        self.nic_execs = 0
        self.telemetry = _fresh_telemetry()
        self._boundary: Optional[dict] = None
        self.emergency_path: Optional[str] = None
        initial = list(seeds) if seeds is not None else list(spec.initial_seeds if spec else [])
        if not initial:
            raise ValueError("at least one initial seed is required")
        self._load_initial(initial)

    # ------------------------------------------------------------------ setup

    def _execute(self, data: bytes):
        raw = self.executor.run(bytes(data))
        if raw is None:
            return None, None
        record = ExecutionRecord(*raw)
        return record, kernels.objective_values(record.exec_cost, record.stack_bytes,
                                                record.cmp_matched, self.n)

    def _load_initial(self, seeds) -> None:
        for data in seeds:
            data = bytes(data)
            if not data or len(data) > self.cfg.max_input_len:
                raise ValueError(f"initial seeds must be 1..{self.cfg.max_input_len} bytes")
            record, values = self._execute(data)
            if record is None:
                raise CampaignAborted("target failed on an initial seed", None)
            self.stats.record_execution(values)
            self.main_execs += 1
            self.pool.add_initial(data, record, values, round_id=0)
        self._round_main = len(seeds)
        self._round_nic = 0

    # ------------------------------------------------------------------ rounds

    @property
    def rounds_done(self) -> int:
        return self.stats.closed_rounds

    def _normalized_value(self, avg_row, mask: int) -> float:
        ids = members(mask)
        return sum(safe_ratio(avg_row[i], self.stats.cumulative_avg[i]) for i in ids) / len(ids)

    def _maybe_nic(self, t: int) -> bool:
        cfg = self.cfg.nic
        if not cfg.enabled or self.stats.closed_rounds < 2:
            return False
        v_prev = self._normalized_value(self.stats.history[-2], self.mask)
        v_cur = self._normalized_value(self.stats.history[-1], self.mask)
        if not should_start(v_prev, v_cur, cfg.start_threshold):
            return False
        budget = math.floor(cfg.budget_fraction * self.main_execs) - self.nic_execs
        result = run_nic(self.pool, self.mask, cfg, self.rng, budget, target=self.executor,
                         stats=self.stats, credits=self.credits, round_id=t,
                         n_objectives=self.n, max_len=self.cfg.max_input_len)
        self.nic_execs += result.executions
        self._round_nic += result.executions
        self.telemetry["nic"].append({
            "round": t,
            "mask": self.mask,
            "v_prev": v_prev,
            "v_cur": v_cur,
            "gradient": gradient(v_prev, v_cur),
            "budget": budget,
            "executions": result.executions,
            "generations": result.generations,
            "front": [list(ind.objectives) for ind in result.front],
            "admitted": [[sid, digest] for sid, digest in result.admitted],
            "pareto_added": result.pareto_added,
            "log": result.log,
        })
        return result.executions > 0

    def _round_over(self, started: float) -> bool:
        if self.cfg.round_seconds is not None:
            return time.monotonic() - started >= self.cfg.round_seconds
        return self.stats.execs_in_round >= self.cfg.round_budget

    def _main_loop(self, t: int, started: float) -> list:
        cfg = self.cfg
        energies = []
        while not self._round_over(started):
            self.state = update_state(self.pool)
            seed = self.pool.pick_next_seed(self.rng)
            ea = assign_energy(seed, self.state, self.stats, self.mask, cfg.energy_cap)
            if cfg.round_seconds is None:
                trials = min(ea.trials, cfg.round_budget - self.stats.execs_in_round)
            else:
                trials = ea.trials
            donor = self.pool.get(self.rng.randrange(len(self.pool))).data
            count, sums, maxima, new_inputs, op_counts, pos_counts = kernels.havoc_batch(
                self.executor, self.pool.coverage, seed.data, donor, trials,
                self.rng.getrandbits(64), cfg.stack_pow2, cfg.max_input_len, self.n)
            self.pool.mark_fuzzed(seed)
            self.stats.record_batch(count, sums, maxima)
            self.main_execs += count
            self._round_main += count
            sel = self.credits
            for op, c in enumerate(op_counts):
                if c:
                    sel._row(sel.op_selected, self.mask, len(op_counts))[op] += c
            for b, c in enumerate(pos_counts):
                if c:
                    sel._row(sel.pos_selected, self.mask, len(pos_counts))[b] += c
            for data, raw in new_inputs:
                record = ExecutionRecord(*raw)
                values = kernels.objective_values(record.exec_cost, record.stack_bytes,
                                                  record.cmp_matched, self.n)
                self.pool.admit(data, record, values, Origin.MAIN, t)
            if self.state is FuzzState.EXPLOITATION:
                ratio = aggregate_ratio(seed.best_objectives, self.stats, self.mask)
                bonus = max_bonus(seed.best_objectives, self.stats, self.mask)
            else:
                ratio = bonus = ""
            self.telemetry["energy"].append([
                t, seed.id, self.mask, self.state.value,
                combination_energy(self.stats, self.mask, cfg.energy_cap), ratio, bonus,
                ea.basis, ea.trials, trials, len(new_inputs)])
            energies.append(ea.trials)
            if count == 0 and trials > 0:
                raise CampaignAborted("target stopped responding", self._write_emergency())
        return energies

    def step_round(self) -> None:
        """Run one full round: select, maybe NIC, main loop, close."""
        t = self.stats.round_id
        started = time.monotonic()
        pioneer = self.bandit.in_pioneer_stage
        self.mask, scores = self.bandit.select(t)
        self.telemetry["selections"].append(
            [t, self.mask, combo_label(self.mask), int(pioneer)]
            + [scores.get(m, math.nan) for m in range(1, 8)])
        fired = self._maybe_nic(t)
        energies = self._main_loop(t, started)
        round_execs = self.stats.execs_in_round
        self.stats.close_round()
        reward = self.bandit.record(self.mask, self.stats, self.cfg.lam)
        good = good_seed_fraction(self.pool, self.stats, self.mask)
        pad = [0.0] * (3 - self.n)
        self.telemetry["rounds"].append(
            [t, self.mask, combo_label(self.mask), self.state.value]
            + list(self.stats.history[-1]) + pad + list(self.stats.cumulative_avg) + pad
            + [round_execs, self._round_main, self._round_nic, self.stats.cumulative_execs,
               len(energies), (sum(energies) / len(energies)) if energies else 0.0,
               int(fired), len(self.pool), self.pool.coverage.count_edges(), good, reward])
        self._round_main = 0
        self._round_nic = 0
        if self._boundary is not None:
            self._boundary = self.state_dict()

    def finished(self) -> bool:
        if self.rounds_done >= self.cfg.total_rounds:
            return True
        return self.cfg.max_execs is not None and self.stats.cumulative_execs >= self.cfg.max_execs

    def run(self, rounds: Optional[int] = None) -> "Campaign":
        """Advance ``rounds`` rounds (default: until the campaign is finished)."""
        done = 0
        while not self.finished() and (rounds is None or done < rounds):
            self.step_round()
            done += 1
            log.debug("round %d mask=%d execs=%d pool=%d", self.rounds_done, self.mask,
                      self.stats.cumulative_execs, len(self.pool))
        return self

    # ------------------------------------------------------------------ snapshot

    def enable_boundary_snapshots(self) -> None:
        """Keep a copy of the last round-boundary state for abort snapshots."""
        self._boundary = self.state_dict()

    def _write_emergency(self) -> Optional[Path]:
        if self._boundary is None:
            return None
        path = Path(self.emergency_path or "abort.snapshot.json")
        _atomic_write(path, json.dumps(self._boundary, sort_keys=True))
        return path

    def state_dict(self) -> dict:
        version, internal, gauss = self.rng.getstate()
        return {
            "version": SNAPSHOT_VERSION,
            "config": self.cfg.to_dict(),
            "target": self.spec.to_dict() if self.spec is not None else None,
            "cmp_total": self.cmp_total,
            "rng": [version, list(internal), gauss],
            "stats": self.stats.to_dict(),
            "bandit": self.bandit.to_dict(),
            "pool": self.pool.to_dict(),
            "credits": self.credits.to_dict(),
            "state": self.state.value,
            "mask": self.mask,
            "main_execs": self.main_execs,
            "nic_execs": self.nic_execs,
            "round_main": self._round_main,
            "round_nic": self._round_nic,
            "telemetry": self.telemetry,
        }

    def snapshot(self, path) -> Path:
        path = Path(path)
        _atomic_write(path, json.dumps(self.state_dict(), sort_keys=True))
        return path

    @classmethod
    def from_state(cls, d: dict, executor=None) -> "Campaign":
        try:
            if not isinstance(d, dict):
                raise SnapshotError("snapshot must be a JSON object")
            if d.get("version") != SNAPSHOT_VERSION:
                raise SnapshotError(
                    f"snapshot version {d.get('version')!r} is not supported "
                    f"(expected {SNAPSHOT_VERSION})")
            cfg = CampaignConfig(**d["config"])
            spec = parse_target_spec(d["target"]) if d["target"] is not None else None
            if spec is None and executor is None:
                raise SnapshotError("snapshot has no embedded target; pass an executor")
            self = cls.__new__(cls)
            self.cfg = cfg
            self.spec = spec
            self.executor = executor if executor is not None else spec.kernel
            self.cmp_total = d["cmp_total"]
            self.n = cfg.n_objectives
            self.rng = random.Random()
            version, internal, gauss = d["rng"]
            self.rng.setstate((version, tuple(internal), gauss))
            self.stats = RoundStats.from_dict(d["stats"])
            self.bandit = Bandit.from_dict(d["bandit"])
            self.pool = SeedPool.from_dict(d["pool"])
            self.credits = CreditTable.from_dict(d["credits"])
            self.state = FuzzState(d["state"])
            self.mask = d["mask"]
            self.main_execs = d["main_execs"]
            self.nic_execs = d["nic_execs"]
            self._round_main = d["round_main"]
            self._round_nic = d["round_nic"]
            self.telemetry = d["telemetry"]
            self._boundary = None
            self.emergency_path = None
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotError(f"corrupted snapshot: {exc!r}") from None
        return self

    @classmethod
    def resume(cls, path, executor=None) -> "Campaign":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, UnicodeDecodeError) as exc:
            raise SnapshotError(f"cannot read snapshot {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"corrupted snapshot {path}: {exc}") from None
        return cls.from_state(d, executor)

    # ------------------------------------------------------------------ report

    def summary(self) -> dict:
        sel_counts = {str(a.mask): a.n for a in self.bandit.arms}
        rounds = self.telemetry["rounds"]
        states = [r[3] for r in rounds]
        total = self.stats.cumulative_execs
        names = [o.name for o in objective_registry(self.n)]
        return {
            "config": self.cfg.to_dict(),
            "target": self.spec.name if self.spec is not None else None,
            "rounds": self.rounds_done,
            "cumulative_execs": total,
            "main_execs": self.main_execs,
            "nic_execs": self.nic_execs,
            "nic_share": (self.nic_execs / total) if total else 0.0,
            "nic_invocations": len(self.telemetry["nic"]),
            "pool_size": len(self.pool),
            "pool_by_origin": {o.value: sum(1 for s in self.pool.seeds if s.origin is o)
                               for o in Origin},
            "edges": self.pool.coverage.count_edges(),
            "selection_counts": sel_counts,
            "state_share": {s.value: (states.count(s.value) / len(states)) if states else 0.0
                            for s in FuzzState},
            "objective_means": dict(zip(names, self.stats.cumulative_avg)),
            "good_seed_fraction": rounds[-1][-2] if rounds else 0.0,
        }

    def write_report(self, out) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "rounds.csv", ROUND_FIELDS, self.telemetry["rounds"])
        _write_csv(out / "selections.csv", SELECTION_FIELDS, self.telemetry["selections"])
        _write_csv(out / "energy.csv", ENERGY_FIELDS, self.telemetry["energy"])
        with open(out / "nic.jsonl", "w") as fh:
            for entry in self.telemetry["nic"]:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True)
                                          + "\n")
        self.credits.dump_json(out / "credits.json")
        save_pool(self.pool, out / "queue")
        return out


def good_seed_fraction(pool: SeedPool, stats: RoundStats, mask: int) -> float:
    seeds = [s for s in pool.seeds if s.best_objectives is not None]
    if not seeds:
        raise ValueError("good_seed_fraction needs at least one executed seed")
    return sum(1 for s in seeds if is_good_seed(s, stats, mask)) / len(seeds)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_campaign(cfg: CampaignConfig, spec: Optional[TargetSpec] = None, seeds=None, out=None,
                 executor=None) -> Campaign:
    """Build, run to completion and (optionally) write the report directory."""
    campaign = Campaign(cfg, spec, executor=executor, seeds=seeds)
    if executor is not None:
        campaign.enable_boundary_snapshots()
        if out is not None:
            campaign.emergency_path = str(Path(out) / "abort.snapshot.json")
            Path(out).mkdir(parents=True, exist_ok=True)
    campaign.run()
    if out is not None:
        campaign.write_report(out)
    return campaign
