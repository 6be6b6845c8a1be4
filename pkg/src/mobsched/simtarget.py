"""Deterministic synthetic targets.

A target is a set of comparison sites (magic byte strings at fixed input
offsets), byte-counting loops and a cost/stack model.  Executing an input
yields the edges it covers, a virtual execution cost in microseconds, the
stack bytes consumed and the number of comparison bytes satisfied.

JSON schema (all integers)::

    {
      "name": "cmp-heavy",
      "base_cost": 40,              # virtual us per execution, > 0
      "per_edge_cost": 6,           # virtual us per fired edge, > 0
      "max_depth": 4096,            # stack cap in bytes, > 0
      "entry_edges": [1],           # always fired
      "sites": [
        {"offset": 0,
         "expected": "CAFEBABE",    # latin-1 text, or "expected_hex": "cafe..."
         "edges": [70],             # fired on a full match
         "requires": null,          # index of a site that must fully match first
         "loop_edge": 60}           # fired once per matched byte (optional)
      ],
      "loops": [{"byte": 32, "edge": 80, "max_count": 128}],
      "stack_model": [{"edge": 70, "bytes": 64}],
      "initial_seeds": ["latin-1 text", {"hex": "00ff"}]
    }

Every edge id appears in exactly one role and is below the map size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Optional

from .kernels import MAP_SIZE, MAX_INPUT_LEN, TargetKernel, objective_values


class TargetSpecError(ValueError):
    """Schema or invariant violation; the message starts with the field path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExecutionRecord:
    edges: tuple
    exec_cost: int
    stack_bytes: int
    cmp_matched: int

    def objectives(self, n: int = 3) -> tuple:
        return objective_values(self.exec_cost, self.stack_bytes, self.cmp_matched, n)


@dataclass(frozen=True)
class CmpSite:
    offset: int
    expected: bytes
    edges: tuple
    requires: Optional[int] = None
    loop_edge: Optional[int] = None


@dataclass(frozen=True)
class LoopSpec:
    byte: int
    edge: int
    max_count: int


@dataclass(frozen=True)
class TargetSpec:
    name: str
    sites: tuple
    base_cost: int
    per_edge_cost: int
    max_depth: int
    entry_edges: tuple = ()
    loops: tuple = ()
    stack_model: tuple = ()  # (edge, bytes) pairs
    initial_seeds: tuple = field(default=(), compare=True)

    @property
    def cmp_total(self) -> int:
        return sum(len(s.expected) for s in self.sites)

    @cached_property
    def kernel(self):
        return TargetKernel(
            self.entry_edges,
            [(s.offset, s.expected, s.edges,
              -1 if s.requires is None else s.requires,
              -1 if s.loop_edge is None else s.loop_edge) for s in self.sites],
            [(lp.byte, lp.edge, lp.max_count) for lp in self.loops],
            dict(self.stack_model),
            self.base_cost, self.per_edge_cost, self.max_depth,
        )

    def to_dict(self) -> dict:
        def enc(b: bytes):
            text = b.decode("latin-1")
            return text if text.isprintable() else {"hex": b.hex()}

        sites = []
        for s in self.sites:
            entry = {"offset": s.offset, "edges": list(s.edges),
                     "requires": s.requires, "loop_edge": s.loop_edge}
            e = enc(s.expected)
            if isinstance(e, dict):
                entry["expected_hex"] = e["hex"]
            else:
                entry["expected"] = e
            sites.append(entry)
        return {
            "name": self.name,
            "base_cost": self.base_cost,
            "per_edge_cost": self.per_edge_cost,
            "max_depth": self.max_depth,
            "entry_edges": list(self.entry_edges),
            "sites": sites,
            "loops": [{"byte": lp.byte, "edge": lp.edge, "max_count": lp.max_count}
                      for lp in self.loops],
            "stack_model": [{"edge": e, "bytes": b} for e, b in self.stack_model],
            "initial_seeds": [enc(s) for s in self.initial_seeds],
        }


def execute(spec: TargetSpec, data: bytes) -> ExecutionRecord:
    if not data:
        raise ValueError("cannot execute an empty input")
    return ExecutionRecord(*spec.kernel.run(bytes(data)))


# --------------------------------------------------------------------------
# parsing


def _int(d: dict, key: str, path: str, minimum: int = 0, required: bool = True, default=None):
    if key not in d:
        if required:
            raise TargetSpecError(f"{path}.{key}", "missing required field")
        return default
    v = d[key]
    if v is None and not required:
        return default
    if not isinstance(v, int) or isinstance(v, bool):
        raise TargetSpecError(f"{path}.{key}", f"expected integer, got {type(v).__name__}")
    if v < minimum:
        raise TargetSpecError(f"{path}.{key}", f"must be >= {minimum}, got {v}")
    return v


def _int_list(d: dict, key: str, path: str) -> tuple:
    v = d.get(key, [])
    if not isinstance(v, list):
        raise TargetSpecError(f"{path}.{key}", "expected a list")
    out = []
    for i, x in enumerate(v):
        if not isinstance(x, int) or isinstance(x, bool) or x < 0:
            raise TargetSpecError(f"{path}.{key}[{i}]", "expected non-negative integer")
        out.append(x)
    return tuple(out)


def _bytes(value, path: str) -> bytes:
    if isinstance(value, str):
        try:
            return value.encode("latin-1")
        except UnicodeEncodeError:
            raise TargetSpecError(path, "text must be latin-1 encodable") from None
    if isinstance(value, dict) and isinstance(value.get("hex"), str):
        try:
            return bytes.fromhex(value["hex"])
        except ValueError:
            raise TargetSpecError(path, "invalid hex string") from None
    raise TargetSpecError(path, "expected a string or {\"hex\": ...}")


def parse_target_spec(d: dict) -> TargetSpec:
    if not isinstance(d, dict):
        raise TargetSpecError("$", "target spec must be a JSON object")
    name = d.get("name")
    if not isinstance(name, str) or not name:
        raise TargetSpecError("$.name", "missing or empty name")
    base = _int(d, "base_cost", "$", 1)
    per_edge = _int(d, "per_edge_cost", "$", 1)
    depth = _int(d, "max_depth", "$", 1)
    entry = _int_list(d, "entry_edges", "$")

    raw_sites = d.get("sites")
    if not isinstance(raw_sites, list) or not raw_sites:
        raise TargetSpecError("$.sites", "expected a non-empty list")
    sites = []
    for i, s in enumerate(raw_sites):
        p = f"$.sites[{i}]"
        if not isinstance(s, dict):
            raise TargetSpecError(p, "expected an object")
        if "expected" in s:
            expected = _bytes(s["expected"], f"{p}.expected")
        elif "expected_hex" in s:
            expected = _bytes({"hex": s["expected_hex"]}, f"{p}.expected_hex")
        else:
            raise TargetSpecError(f"{p}.expected", "missing required field")
        if not expected:
            raise TargetSpecError(f"{p}.expected", "expected bytes must be non-empty")
        requires = _int(s, "requires", p, 0, required=False)
        if requires is not None and requires >= i:
            raise TargetSpecError(f"{p}.requires", "must reference an earlier site")
        sites.append(CmpSite(
            offset=_int(s, "offset", p, 0),
            expected=expected,
            edges=_int_list(s, "edges", p),
            requires=requires,
            loop_edge=_int(s, "loop_edge", p, 0, required=False),
        ))

    loops = []
    for i, lp in enumerate(d.get("loops", [])):
        p = f"$.loops[{i}]"
        byte = _int(lp, "byte", p, 0)
        if byte > 255:
            raise TargetSpecError(f"{p}.byte", "must be a byte value 0..255")
        loops.append(LoopSpec(byte, _int(lp, "edge", p, 0), _int(lp, "max_count", p, 1)))

    stack = []
    for i, entry_ in enumerate(d.get("stack_model", [])):
        p = f"$.stack_model[{i}]"
        stack.append((_int(entry_, "edge", p, 0), _int(entry_, "bytes", p, 0)))

    seen: dict[int, str] = {}

    def claim(edge: int, where: str) -> None:
        if edge >= MAP_SIZE:
            raise TargetSpecError(where, f"edge id {edge} exceeds map size {MAP_SIZE}")
        if edge in seen:
            raise TargetSpecError(where, f"duplicate edge id {edge} (also used at {seen[edge]})")
        seen[edge] = where

    for i, e in enumerate(entry):
        claim(e, f"$.entry_edges[{i}]")
    for i, s in enumerate(sites):
        for j, e in enumerate(s.edges):
            claim(e, f"$.sites[{i}].edges[{j}]")
        if s.loop_edge is not None:
            claim(s.loop_edge, f"$.sites[{i}].loop_edge")
    for i, lp in enumerate(loops):
        claim(lp.edge, f"$.loops[{i}].edge")
    for i, (e, _) in enumerate(stack):
        if e not in seen:
            raise TargetSpecError(f"$.stack_model[{i}].edge", f"unknown edge id {e}")
    if len({e for e, _ in stack}) != len(stack):
        raise TargetSpecError("$.stack_model", "duplicate edge entries")

    seeds = []
    for i, s in enumerate(d.get("initial_seeds", [])):
        b = _bytes(s, f"$.initial_seeds[{i}]")
        if not b or len(b) > MAX_INPUT_LEN:
            raise TargetSpecError(f"$.initial_seeds[{i}]", f"length must be 1..{MAX_INPUT_LEN}")
        seeds.append(b)

    return TargetSpec(name=name, sites=tuple(sites), base_cost=base, per_edge_cost=per_edge,
                      max_depth=depth, entry_edges=entry, loops=tuple(loops),
                      stack_model=tuple(stack), initial_seeds=tuple(seeds))


BUILTIN_TARGETS = ("shallow-magic", "nested-magic-deep-stack", "cmp-heavy")


def builtin_names() -> tuple:
    return BUILTIN_TARGETS


def load_target_spec(path_or_name) -> TargetSpec:
    """Load a built-in target by name or a JSON file by path."""
    name = str(path_or_name)
    if name in BUILTIN_TARGETS:
        text = resources.files("mobsched").joinpath(f"targets/{name}.json").read_text()
    else:
        path = Path(name)
        if not path.is_file():
            raise FileNotFoundError(f"no such target file or built-in target: {name}")
        text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TargetSpecError("$", f"invalid JSON: {exc}") from None
    return parse_target_spec(raw)


def save_target_spec(spec: TargetSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
