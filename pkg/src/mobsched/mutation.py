"""AFL-style mutation operators and per-combination credit tables.

Operators and positions are drawn with Laplace-smoothed weights
``credit + 1``; a credit is earned whenever a mutation raised any member
objective of the active combination above the parent's best.
"""

from __future__ import annotations

import json
from enum import IntEnum

from . import kernels
from .kernels import N_OPERATORS, N_POSITION_BUCKETS


class OperatorId(IntEnum):
    BitFlip1 = 0
    BitFlip2 = 1
    BitFlip4 = 2
    ByteFlip1 = 3
    ByteFlip2 = 4
    ByteFlip4 = 5
    Arith8 = 6
    Arith16 = 7
    Arith32 = 8
    InterestingValue = 9
    RandomByte = 10
    DeleteBlock = 11
    InsertBlock = 12
    OverwriteBlock = 13
    Splice = 14


assert len(OperatorId) == N_OPERATORS


def position_bucket(offset: int, length: int) -> int:
    """Relative-offset decile of ``offset`` within an input of ``length`` bytes."""
    return min(offset * N_POSITION_BUCKETS // length, N_POSITION_BUCKETS - 1)


def bucket_range(bucket: int, length: int) -> tuple[int, int]:
    return bucket * length // N_POSITION_BUCKETS, (bucket + 1) * length // N_POSITION_BUCKETS


class CreditTable:
    """Operator and position credits, one row per combination mask."""

    def __init__(self) -> None:
        self.operators: dict[int, list[int]] = {}
        self.positions: dict[int, list[int]] = {}
        # selection telemetry (how often each was drawn), independent of credit
        self.op_selected: dict[int, list[int]] = {}
        self.pos_selected: dict[int, list[int]] = {}

    def _row(self, table: dict, mask: int, width: int) -> list[int]:
        row = table.get(mask)
        if row is None:
            row = table[mask] = [0] * width
        return row

    def operator_credits(self, mask: int) -> list[int]:
        return self._row(self.operators, mask, N_OPERATORS)

    def position_credits(self, mask: int) -> list[int]:
        return self._row(self.positions, mask, N_POSITION_BUCKETS)

    def note_selection(self, mask: int, op: int, bucket: int) -> None:
        self._row(self.op_selected, mask, N_OPERATORS)[op] += 1
        self._row(self.pos_selected, mask, N_POSITION_BUCKETS)[bucket] += 1

    def to_dict(self) -> dict:
        def dump(table):
            return {str(m): list(row) for m, row in sorted(table.items())}

        return {
            "operator_names": [op.name for op in OperatorId],
            "operators": dump(self.operators),
            "positions": dump(self.positions),
            "operator_selected": dump(self.op_selected),
            "position_selected": dump(self.pos_selected),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CreditTable":
        table = cls()

        def load(rows):
            return {int(m): list(row) for m, row in rows.items()}

        table.operators = load(d["operators"])
        table.positions = load(d["positions"])
        table.op_selected = load(d["operator_selected"])
        table.pos_selected = load(d["position_selected"])
        return table

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def pick_operator(table: CreditTable, mask: int, rng) -> OperatorId:
    weights = [c + 1 for c in table.operator_credits(mask)]
    return OperatorId(rng.choices(range(N_OPERATORS), weights=weights)[0])


def pick_position(table: CreditTable, mask: int, seed_len: int, rng) -> int:
    if seed_len < 1:
        raise ValueError("seed_len must be >= 1")
    credits = table.position_credits(mask)
    occupied = [b for b in range(N_POSITION_BUCKETS)
                if bucket_range(b, seed_len)[0] < bucket_range(b, seed_len)[1]]
    bucket = rng.choices(occupied, weights=[credits[b] + 1 for b in occupied])[0]
    lo, hi = bucket_range(bucket, seed_len)
    return min(rng.randrange(lo, hi), seed_len - 1)


def credit_update(table: CreditTable, mask: int, op: int, bucket: int, improved: bool) -> None:
    if improved:
        table.operator_credits(mask)[int(op)] += 1
        table.position_credits(mask)[bucket] += 1


def apply_operator(op: int, data: bytes, offset: int, rng, donor: bytes | None = None,
                   max_len: int = kernels.MAX_INPUT_LEN) -> bytes:
    """Mutated copy of ``data``; operator parameters come from one 64-bit draw of ``rng``."""
    return kernels.apply_op(int(op), bytes(data), offset, rng.getrandbits(64), donor, max_len)


def two_point(a: bytes, b: bytes, lo: int, hi: int) -> tuple[bytes, bytes]:
    """Exchange ``[lo, hi)`` between ``a`` and ``b``."""
    return a[:lo] + b[lo:hi] + a[hi:], b[:lo] + a[lo:hi] + b[hi:]


def crossover(a: bytes, b: bytes, rng) -> tuple[bytes, bytes]:
    """Two-point crossover over the common length; both children are kept."""
    if not a or not b:
        raise ValueError("crossover parents must be non-empty")
    common = min(len(a), len(b))
    lo, hi = sorted((rng.randrange(common + 1), rng.randrange(common + 1)))
    return two_point(a, b, lo, hi)


def improved_any(child, parent, ids) -> bool:
    return any(child[i] > parent[i] for i in ids)
