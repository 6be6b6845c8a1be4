"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row times one hot kernel on identical inputs under both backends and
checks that the outputs agree.
"""

from __future__ import annotations

import argparse
import random
import time

from mobsched import _pycore
from mobsched.simtarget import load_target_spec

try:
    from mobsched import _core
except ImportError:  # extension not built
    _core = None


def _kernel(mod, spec):
    return mod.TargetKernel(
        spec.entry_edges,
        [(s.offset, s.expected, s.edges, -1 if s.requires is None else s.requires,
          -1 if s.loop_edge is None else s.loop_edge) for s in spec.sites],
        [(lp.byte, lp.edge, lp.max_count) for lp in spec.loops],
        dict(spec.stack_model), spec.base_cost, spec.per_edge_cost, spec.max_depth)


def bench_havoc(mod, spec, trials):
    target, cov = _kernel(mod, spec), mod.CoverageMap()
    seed = spec.initial_seeds[0]
    return mod.havoc_batch(target, cov, seed, seed[::-1], trials, 12345, 4, 4096, 3)[:3]


def bench_run(mod, spec, inputs):
    target = _kernel(mod, spec)
    return [target.run(x) for x in inputs]


def bench_ranks(mod, points):
    return mod.nondominated_ranks(points)


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description="kernel backend benchmark")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--target", default="cmp-heavy")
    args = p.parse_args(argv)
    if _core is None:
        print("compiled core not built; only the Python backend is available")
        return 1
    spec = load_target_spec(args.target)
    rng = random.Random(0)
    inputs = [bytes(rng.randrange(256) for _ in range(rng.randint(1, 64))) for _ in range(5000)]
    points = [tuple(rng.randint(0, 20) for _ in range(3)) for _ in range(400)]
    cases = [
        ("havoc_batch x20000", lambda m: bench_havoc(m, spec, 20000)),
        ("target.run x5000", lambda m: bench_run(m, spec, inputs)),
        ("nondominated_ranks 400x3", lambda m: bench_ranks(m, points)),
    ]
    print(f"{'kernel':28s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}  equal")
    for name, fn in cases:
        tp, op = timed(lambda: fn(_pycore), args.repeat)
        tc, oc = timed(lambda: fn(_core), args.repeat)
        print(f"{name:28s} {tp:10.4f} {tc:11.4f} {tp / tc:7.1f}x  {op == oc}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
