"""Pure-Python kernels.

Reference semantics for the hot paths: splitmix64 stream, byte-level
mutation primitives, synthetic-target execution, bucketed edge coverage,
the havoc trial loop and non-dominated ranking.  ``_core.pyx`` mirrors this
module exactly and must produce bit-identical results.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
MAP_SIZE = 65536
MAX_INPUT_LEN = 4096
N_OPERATORS = 15
N_POSITION_BUCKETS = 10

INTERESTING_8 = (-128, -1, 0, 1, 16, 32, 64, 100, 127)
INTERESTING_16 = INTERESTING_8 + (-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767)
INTERESTING_32 = INTERESTING_16 + (
    -2147483648, -100663046, -32769, 32768, 65535, 65536, 100663045, 2147483647,
)

OP_BITFLIP1, OP_BITFLIP2, OP_BITFLIP4 = 0, 1, 2
OP_BYTEFLIP1, OP_BYTEFLIP2, OP_BYTEFLIP4 = 3, 4, 5
OP_ARITH8, OP_ARITH16, OP_ARITH32 = 6, 7, 8
OP_INTERESTING, OP_RANDOM_BYTE = 9, 10
OP_DELETE, OP_INSERT, OP_OVERWRITE, OP_SPLICE = 11, 12, 13, 14

BACKEND = "python"


class Rng64:
    """splitmix64; the only randomness used inside kernels."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next() % n


def hit_bucket(count: int) -> int:
    """AFL hit-count class, 1..8 (0 for no hits)."""
    if count <= 0:
        return 0
    if count <= 3:
        return count
    if count <= 7:
        return 4
    if count <= 15:
        return 5
    if count <= 31:
        return 6
    if count <= 127:
        return 7
    return 8


# --------------------------------------------------------------------------
# mutation primitives (in place on a bytearray)


def flip_bits(buf: bytearray, bit_pos: int, width: int) -> None:
    nbits = len(buf) * 8
    for k in range(width):
        pos = bit_pos + k
        if pos < nbits:
            buf[pos >> 3] ^= 0x80 >> (pos & 7)


def add_int(buf: bytearray, offset: int, width: int, delta: int, big_endian: bool) -> None:
    """Add ``delta`` modulo 2**(8*width) to the integer stored at ``offset``."""
    chunk = bytes(buf[offset:offset + width])
    order = "big" if big_endian else "little"
    value = (int.from_bytes(chunk, order) + delta) % (1 << (8 * width))
    buf[offset:offset + width] = value.to_bytes(width, order)


def write_int(buf: bytearray, offset: int, width: int, value: int, big_endian: bool) -> None:
    value %= 1 << (8 * width)
    buf[offset:offset + width] = value.to_bytes(width, "big" if big_endian else "little")


def _clamp_width(n: int, width: int) -> int:
    return width if n >= width else (2 if n >= 2 and width == 4 else 1)


def _mutate(op: int, buf: bytearray, offset: int, rng: Rng64, donor, max_len: int) -> None:
    n = len(buf)
    if offset >= n:
        offset = n - 1
    if op <= OP_BITFLIP4:
        width = 1 << op
        bit = rng.below(8)
        flip_bits(buf, offset * 8 + bit, width)
    elif op <= OP_BYTEFLIP4:
        width = min(1 << (op - OP_BYTEFLIP1), n)
        offset = min(offset, n - width)
        for k in range(width):
            buf[offset + k] ^= 0xFF
    elif op <= OP_ARITH32:
        width = _clamp_width(n, 1 << (op - OP_ARITH8))
        offset = min(offset, n - width)
        delta = 1 + rng.below(35)
        if rng.below(2):
            delta = -delta
        big = rng.below(2) == 1
        add_int(buf, offset, width, delta, big)
    elif op == OP_INTERESTING:
        nwidths = 3 if n >= 4 else (2 if n >= 2 else 1)
        width = 1 << rng.below(nwidths)
        table = INTERESTING_8 if width == 1 else (INTERESTING_16 if width == 2 else INTERESTING_32)
        value = table[rng.below(len(table))]
        big = rng.below(2) == 1
        offset = min(offset, n - width)
        write_int(buf, offset, width, value, big)
    elif op == OP_RANDOM_BYTE:
        buf[offset] ^= 1 + rng.below(255)
    elif op == OP_DELETE:
        if n < 2:
            return
        dl = 1 + rng.below(min(n - 1, 32))
        offset = min(offset, n - dl)
        del buf[offset:offset + dl]
    elif op == OP_INSERT:
        il = 1 + rng.below(32)
        if n + il > max_len:
            il = max_len - n
        if il <= 0:
            return
        if rng.below(4):
            src = rng.below(n)
            chunk = bytes(buf[src:src + il])
        else:
            chunk = bytes((rng.below(256),)) * il
        buf[offset:offset] = chunk
    elif op == OP_OVERWRITE:
        ol = 1 + rng.below(min(n, 32))
        offset = min(offset, n - ol)
        if rng.below(4):
            src = rng.below(n - ol + 1)
            chunk = bytes(buf[src:src + ol])
        else:
            chunk = bytes((rng.below(256),)) * ol
        buf[offset:offset + ol] = chunk
    elif op == OP_SPLICE:
        other = donor if donor else bytes(buf)
        cut = rng.below(len(other))
        tail = other[cut:]
        del buf[offset + 1:]
        buf.extend(tail[: max_len - len(buf)])
    else:
        raise ValueError(f"unknown operator {op}")


def apply_op(op: int, data: bytes, offset: int, seed: int, donor: bytes | None = None,
             max_len: int = MAX_INPUT_LEN) -> bytes:
    buf = bytearray(data)
    _mutate(op, buf, offset, Rng64(seed), donor, max_len)
    return bytes(buf)


# --------------------------------------------------------------------------
# synthetic target


class TargetKernel:
    """Flattened synthetic target.

    ``sites`` entries are ``(offset, expected, guarded_edges, requires, loop_edge)``
    with ``requires``/``loop_edge`` set to -1 when absent; ``loops`` entries
    are ``(byte_value, edge, max_count)``.
    """

    def __init__(self, entry_edges, sites, loops, stack_model, base_cost: int,
                 per_edge_cost: int, max_depth: int) -> None:
        self.entry_edges = tuple(int(e) for e in entry_edges)
        self.sites = tuple(
            (int(o), bytes(x), tuple(int(g) for g in ge), int(r), int(le))
            for o, x, ge, r, le in sites
        )
        self.loops = tuple((int(b), int(e), int(m)) for b, e, m in loops)
        self.stack = {int(e): int(s) for e, s in dict(stack_model).items()}
        self.base_cost = int(base_cost)
        self.per_edge_cost = int(per_edge_cost)
        self.max_depth = int(max_depth)
        self.cmp_total = sum(len(s[1]) for s in self.sites)

    def run(self, data: bytes):
        """Return ``(edges, exec_cost, stack_bytes, cmp_matched)``."""
        n = len(data)
        edges = list(self.entry_edges)
        full = [False] * len(self.sites)
        cmp = 0
        for idx, (off, expected, guarded, requires, loop_edge) in enumerate(self.sites):
            if requires >= 0 and not full[requires]:
                continue
            m = 0
            limit = min(len(expected), n - off) if off < n else 0
            while m < limit and data[off + m] == expected[m]:
                m += 1
            cmp += m
            if loop_edge >= 0 and m:
                edges.extend((loop_edge,) * m)
            if m == len(expected):
                full[idx] = True
                edges.extend(guarded)
        for byte_value, edge, max_count in self.loops:
            c = data.count(byte_value)
            if c > max_count:
                c = max_count
            if c:
                edges.extend((edge,) * c)
        stack = 0
        table = self.stack
        for e in edges:
            stack += table.get(e, 0)
        if stack > self.max_depth:
            stack = self.max_depth
        cost = self.base_cost + self.per_edge_cost * len(edges)
        return tuple(edges), cost, stack, cmp


def objective_values(cost: int, stack: int, cmp: int, n_obj: int) -> tuple:
    full = (1e6 / cost, float(stack), float(cmp))
    return full[:n_obj]


# --------------------------------------------------------------------------
# coverage


class CoverageMap:
    """Per-edge maximum hit bucket seen so far."""

    def __init__(self, size: int = MAP_SIZE) -> None:
        self.size = size
        self.virgin = bytearray(size)

    def classify(self, edges) -> list:
        counts: dict[int, int] = {}
        for e in edges:
            if e < 0 or e >= self.size:
                raise ValueError(f"edge id {e} outside map of size {self.size}")
            counts[e] = counts.get(e, 0) + 1
        return sorted((e, hit_bucket(c)) for e, c in counts.items())

    def is_new(self, edges) -> bool:
        virgin = self.virgin
        return any(b > virgin[e] for e, b in self.classify(edges))

    def merge(self, edges) -> bool:
        virgin = self.virgin
        new = False
        for e, b in self.classify(edges):
            if b > virgin[e]:
                virgin[e] = b
                new = True
        return new

    def get(self, edge: int) -> int:
        return self.virgin[edge]

    def to_sparse(self) -> dict:
        return {i: b for i, b in enumerate(self.virgin) if b}

    def load_sparse(self, entries) -> None:
        self.virgin = bytearray(self.size)
        for e, b in dict(entries).items():
            self.virgin[int(e)] = int(b)

    def count_edges(self) -> int:
        return sum(1 for b in self.virgin if b)


# --------------------------------------------------------------------------
# havoc batch


def havoc_batch(target, covmap: CoverageMap, data: bytes, donor, n_trials: int, seed: int,
                stack_pow2: int, max_len: int, n_obj: int):
    """Run ``n_trials`` stacked-havoc mutate/execute iterations.

    Returns ``(count, sums, maxima, new_inputs, op_counts, pos_counts)`` where
    ``new_inputs`` holds ``(bytes, record)`` pairs that raised coverage; the
    coverage map is updated in place.
    """
    rng = Rng64(seed)
    sums = [0.0] * n_obj
    maxima = [0.0] * n_obj
    op_counts = [0] * N_OPERATORS
    pos_counts = [0] * N_POSITION_BUCKETS
    new_inputs = []
    count = 0
    for _ in range(n_trials):
        buf = bytearray(data)
        n_ops = 1 << rng.below(stack_pow2)
        for _ in range(n_ops):
            op = rng.below(N_OPERATORS)
            n = len(buf)
            off = rng.below(n)
            op_counts[op] += 1
            pos_counts[off * N_POSITION_BUCKETS // n] += 1
            _mutate(op, buf, off, rng, donor, max_len)
        candidate = bytes(buf)
        record = target.run(candidate)
        if record is None:
            continue
        edges, cost, stack, cmp = record
        count += 1
        obs = objective_values(cost, stack, cmp, n_obj)
        for i in range(n_obj):
            v = obs[i]
            sums[i] += v
            if v > maxima[i]:
                maxima[i] = v
        if covmap.merge(edges):
            new_inputs.append((candidate, record))
    return count, sums, maxima, new_inputs, op_counts, pos_counts


# --------------------------------------------------------------------------
# Pareto ranking (all objectives maximised)


def dominates(a, b) -> bool:
    better = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            better = True
    return better


def nondominated_ranks(points) -> list:
    """Fast non-dominated sort; returns 1-based front index per point."""
    n = len(points)
    if n and any(len(p) != len(points[0]) for p in points):
        raise ValueError("dimension mismatch")
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for p in range(n):
        for q in range(p + 1, n):
            if dominates(points[p], points[q]):
                dominated_by[p].append(q)
                counts[q] += 1
            elif dominates(points[q], points[p]):
                dominated_by[q].append(p)
                counts[p] += 1
    ranks = [0] * n
    current = [p for p in range(n) if counts[p] == 0]
    rank = 1
    while current:
        nxt = []
        for p in current:
            ranks[p] = rank
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        current = nxt
        rank += 1
    return ranks


def crowding_distances(points) -> list:
    n = len(points)
    if n == 0:
        return []
    dist = [0.0] * n
    m = len(points[0])
    for k in range(m):
        order = sorted(range(n), key=lambda i: points[i][k])
        lo, hi = points[order[0]][k], points[order[-1]][k]
        dist[order[0]] = float("inf")
        dist[order[-1]] = float("inf")
        span = hi - lo
        if span <= 0:
            continue
        for j in range(1, n - 1):
            i = order[j]
            dist[i] += (points[order[j + 1]][k] - points[order[j - 1]][k]) / span
    return dist
