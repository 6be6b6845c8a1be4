# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; mirrors ``_pycore`` bit for bit."""

from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memmove, memset

from mobsched._pycore import (  # noqa: F401  (re-exported, not hot)
    MAP_SIZE, MAX_INPUT_LEN, N_OPERATORS, N_POSITION_BUCKETS,
    INTERESTING_8, INTERESTING_16, INTERESTING_32,
    hit_bucket, flip_bits, add_int, write_int, dominates, objective_values,
    crowding_distances,
)

BACKEND = "cython"

cdef enum:
    C_N_OPS = 15
    C_N_POS = 10
    C_BUF_CAP = 4096 + 64

cdef int64_t[9] I8 = [-128, -1, 0, 1, 16, 32, 64, 100, 127]
cdef int64_t[19] I16 = [-128, -1, 0, 1, 16, 32, 64, 100, 127,
                        -32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767]
cdef int64_t[27] I32 = [-128, -1, 0, 1, 16, 32, 64, 100, 127,
                        -32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767,
                        -2147483648, -100663046, -32769, 32768, 65535, 65536,
                        100663045, 2147483647]


cdef inline uint64_t sm_next(uint64_t* s) noexcept nogil:
    s[0] += 0x9E3779B97F4A7C15ULL
    cdef uint64_t z = s[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline Py_ssize_t sm_below(uint64_t* s, Py_ssize_t n) noexcept nogil:
    return <Py_ssize_t>(sm_next(s) % <uint64_t>n)


cdef class Rng64:
    cdef public uint64_t state

    def __init__(self, seed):
        self.state = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)

    def next(self):
        return sm_next(&self.state)

    def below(self, n):
        return sm_below(&self.state, n)


cdef inline Py_ssize_t _min(Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    return a if a < b else b


cdef inline void _add_int(uint8_t* buf, Py_ssize_t off, int width, int64_t delta, bint big) noexcept nogil:
    cdef uint64_t v = 0
    cdef int k
    cdef uint64_t mask = 0xFFFFFFFFFFFFFFFFULL if width == 8 else ((<uint64_t>1 << (8 * width)) - 1)
    if big:
        for k in range(width):
            v = (v << 8) | buf[off + k]
    else:
        for k in range(width - 1, -1, -1):
            v = (v << 8) | buf[off + k]
    v = (v + <uint64_t>delta) & mask
    _store(buf, off, width, v, big)


cdef inline void _store(uint8_t* buf, Py_ssize_t off, int width, uint64_t v, bint big) noexcept nogil:
    cdef int k
    if big:
        for k in range(width - 1, -1, -1):
            buf[off + k] = <uint8_t>(v & 0xFF)
            v >>= 8
    else:
        for k in range(width):
            buf[off + k] = <uint8_t>(v & 0xFF)
            v >>= 8


cdef inline int _clamp_width(Py_ssize_t n, int width) noexcept nogil:
    if n >= width:
        return width
    if n >= 2 and width == 4:
        return 2
    return 1


cdef Py_ssize_t c_mutate(int op, uint8_t* buf, Py_ssize_t n, Py_ssize_t offset, uint64_t* s,
                         const uint8_t* donor, Py_ssize_t dn, Py_ssize_t max_len,
                         uint8_t* scratch) noexcept nogil:
    """Mutate ``buf[:n]`` in place; returns the new length."""
    cdef Py_ssize_t width, k, bitpos, nbits, dl, il, ol, src, avail, cut, tail_len, room
    cdef int64_t delta, value
    cdef bint big
    cdef int nwidths
    cdef uint8_t c
    cdef const uint8_t* other
    cdef Py_ssize_t other_len
    if offset >= n:
        offset = n - 1
    if op <= 2:
        width = 1 << op
        bitpos = offset * 8 + sm_below(s, 8)
        nbits = n * 8
        for k in range(width):
            if bitpos + k < nbits:
                buf[(bitpos + k) >> 3] ^= <uint8_t>(0x80 >> ((bitpos + k) & 7))
    elif op <= 5:
        width = _min(1 << (op - 3), n)
        offset = _min(offset, n - width)
        for k in range(width):
            buf[offset + k] ^= 0xFF
    elif op <= 8:
        width = _clamp_width(n, 1 << (op - 6))
        offset = _min(offset, n - width)
        delta = 1 + sm_below(s, 35)
        if sm_below(s, 2):
            delta = -delta
        big = sm_below(s, 2) == 1
        _add_int(buf, offset, <int>width, delta, big)
    elif op == 9:
        nwidths = 3 if n >= 4 else (2 if n >= 2 else 1)
        width = 1 << sm_below(s, nwidths)
        if width == 1:
            value = I8[sm_below(s, 9)]
        elif width == 2:
            value = I16[sm_below(s, 19)]
        else:
            value = I32[sm_below(s, 27)]
        big = sm_below(s, 2) == 1
        offset = _min(offset, n - width)
        _store(buf, offset, <int>width, <uint64_t>value, big)
    elif op == 10:
        buf[offset] ^= <uint8_t>(1 + sm_below(s, 255))
    elif op == 11:
        if n < 2:
            return n
        dl = 1 + sm_below(s, _min(n - 1, 32))
        offset = _min(offset, n - dl)
        memmove(buf + offset, buf + offset + dl, n - offset - dl)
        n -= dl
    elif op == 12:
        il = 1 + sm_below(s, 32)
        if n + il > max_len:
            il = max_len - n
        if il <= 0:
            return n
        if sm_below(s, 4):
            src = sm_below(s, n)
            avail = _min(il, n - src)
            memcpy(scratch, buf + src, avail)
        else:
            c = <uint8_t>sm_below(s, 256)
            avail = il
            memset(scratch, c, avail)
        memmove(buf + offset + avail, buf + offset, n - offset)
        memcpy(buf + offset, scratch, avail)
        n += avail
    elif op == 13:
        ol = 1 + sm_below(s, _min(n, 32))
        offset = _min(offset, n - ol)
        if sm_below(s, 4):
            src = sm_below(s, n - ol + 1)
            memcpy(scratch, buf + src, ol)
        else:
            c = <uint8_t>sm_below(s, 256)
            memset(scratch, c, ol)
        memcpy(buf + offset, scratch, ol)
    elif op == 14:
        if dn > 0:
            other = donor
            other_len = dn
        else:
            memcpy(scratch, buf, n)
            other = scratch
            other_len = n
        cut = sm_below(s, other_len)
        tail_len = other_len - cut
        room = max_len - (offset + 1)
        tail_len = _min(tail_len, room)
        memmove(buf + offset + 1, other + cut, tail_len)
        n = offset + 1 + tail_len
    return n


def apply_op(int op, bytes data, Py_ssize_t offset, seed, donor=None, Py_ssize_t max_len=4096):
    cdef Py_ssize_t n = len(data)
    if op < 0 or op >= C_N_OPS:
        raise ValueError(f"unknown operator {op}")
    if n == 0 or n > max_len or max_len > C_BUF_CAP - 64:
        raise ValueError("input length outside [1, max_len]")
    cdef uint8_t buf[C_BUF_CAP]
    cdef uint8_t scratch[C_BUF_CAP]
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef bytes d = donor if donor else b""
    memcpy(buf, <const uint8_t*>(<char*>data), n)
    n = c_mutate(op, buf, n, offset, &s, <const uint8_t*>(<char*>d), len(d), max_len, scratch)
    return (<char*>buf)[:n]


cdef class TargetKernel:
    cdef int64_t* entry
    cdef Py_ssize_t n_entry
    cdef Py_ssize_t n_sites
    cdef int64_t* site_off
    cdef int64_t* exp_start
    cdef int64_t* exp_len
    cdef uint8_t* expected
    cdef int64_t* guard_start
    cdef int64_t* guard_len
    cdef int64_t* guards
    cdef int64_t* requires
    cdef int64_t* loop_edge
    cdef Py_ssize_t n_loops
    cdef int64_t* loop_byte
    cdef int64_t* loop_edge_id
    cdef int64_t* loop_max
    cdef int64_t* stack_table
    cdef int64_t* edge_buf
    cdef uint8_t* full
    cdef Py_ssize_t edge_cap
    cdef public int64_t base_cost
    cdef public int64_t per_edge_cost
    cdef public int64_t max_depth
    cdef public int64_t cmp_total
    cdef public tuple entry_edges, sites, loops
    cdef public dict stack

    def __cinit__(self):
        self.entry = NULL

    def __init__(self, entry_edges, sites, loops, stack_model, base_cost, per_edge_cost, max_depth):
        cdef Py_ssize_t i, j, ne, ng
        self.entry_edges = tuple(int(e) for e in entry_edges)
        self.sites = tuple((int(o), bytes(x), tuple(int(g) for g in ge), int(r), int(le))
                           for o, x, ge, r, le in sites)
        self.loops = tuple((int(b), int(e), int(m)) for b, e, m in loops)
        self.stack = {int(e): int(v) for e, v in dict(stack_model).items()}
        self.base_cost = base_cost
        self.per_edge_cost = per_edge_cost
        self.max_depth = max_depth
        self.n_entry = len(self.entry_edges)
        self.n_sites = len(self.sites)
        self.n_loops = len(self.loops)
        ne = sum(len(s[1]) for s in self.sites)
        ng = sum(len(s[2]) for s in self.sites)
        self.cmp_total = ne
        self.entry = <int64_t*>malloc(sizeof(int64_t) * (self.n_entry + 1))
        self.site_off = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.exp_start = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.exp_len = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.expected = <uint8_t*>malloc(ne + 1)
        self.guard_start = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.guard_len = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.guards = <int64_t*>malloc(sizeof(int64_t) * (ng + 1))
        self.requires = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.loop_edge = <int64_t*>malloc(sizeof(int64_t) * (self.n_sites + 1))
        self.full = <uint8_t*>malloc(self.n_sites + 1)
        self.loop_byte = <int64_t*>malloc(sizeof(int64_t) * (self.n_loops + 1))
        self.loop_edge_id = <int64_t*>malloc(sizeof(int64_t) * (self.n_loops + 1))
        self.loop_max = <int64_t*>malloc(sizeof(int64_t) * (self.n_loops + 1))
        self.stack_table = <int64_t*>malloc(sizeof(int64_t) * 65536)
        memset(self.stack_table, 0, sizeof(int64_t) * 65536)
        for i, e in enumerate(self.entry_edges):
            self.entry[i] = e
        cdef Py_ssize_t ep = 0, gp = 0
        for i, (o, x, ge, r, le) in enumerate(self.sites):
            self.site_off[i] = o
            self.exp_start[i] = ep
            self.exp_len[i] = len(x)
            for j in range(len(x)):
                self.expected[ep + j] = x[j]
            ep += len(x)
            self.guard_start[i] = gp
            self.guard_len[i] = len(ge)
            for j in range(len(ge)):
                self.guards[gp + j] = ge[j]
            gp += len(ge)
            self.requires[i] = r
            self.loop_edge[i] = le
        for i, (b, e, m) in enumerate(self.loops):
            self.loop_byte[i] = b
            self.loop_edge_id[i] = e
            self.loop_max[i] = m
        for e, v in self.stack.items():
            if 0 <= e < 65536:
                self.stack_table[e] = v
        self.edge_cap = self.n_entry + ne + ng + sum(m for _, _, m in self.loops) + 1
        self.edge_buf = <int64_t*>malloc(sizeof(int64_t) * self.edge_cap)

    def __dealloc__(self):
        if self.entry == NULL:
            return
        free(self.entry); free(self.site_off); free(self.exp_start); free(self.exp_len)
        free(self.expected); free(self.guard_start); free(self.guard_len); free(self.guards)
        free(self.requires); free(self.loop_edge); free(self.full); free(self.loop_byte)
        free(self.loop_edge_id); free(self.loop_max); free(self.stack_table); free(self.edge_buf)

    def __reduce__(self):
        return (TargetKernel, (self.entry_edges, self.sites, self.loops, self.stack,
                               self.base_cost, self.per_edge_cost, self.max_depth))

    cdef Py_ssize_t c_run(self, const uint8_t* data, Py_ssize_t n, int64_t* cost,
                          int64_t* stack, int64_t* cmp) noexcept nogil:
        cdef Py_ssize_t ne = 0, i, j, m, limit, off, el, c, k
        cdef int64_t st = 0, cm = 0
        cdef const uint8_t* exp
        for i in range(self.n_entry):
            self.edge_buf[ne] = self.entry[i]
            ne += 1
        for i in range(self.n_sites):
            self.full[i] = 0
            if self.requires[i] >= 0 and not self.full[self.requires[i]]:
                continue
            off = self.site_off[i]
            el = self.exp_len[i]
            exp = self.expected + self.exp_start[i]
            limit = _min(el, n - off) if off < n else 0
            m = 0
            while m < limit and data[off + m] == exp[m]:
                m += 1
            cm += m
            if self.loop_edge[i] >= 0:
                for k in range(m):
                    self.edge_buf[ne] = self.loop_edge[i]
                    ne += 1
            if m == el:
                self.full[i] = 1
                for j in range(self.guard_len[i]):
                    self.edge_buf[ne] = self.guards[self.guard_start[i] + j]
                    ne += 1
        for i in range(self.n_loops):
            c = 0
            for j in range(n):
                if data[j] == self.loop_byte[i]:
                    c += 1
            if c > self.loop_max[i]:
                c = self.loop_max[i]
            for k in range(c):
                self.edge_buf[ne] = self.loop_edge_id[i]
                ne += 1
        for i in range(ne):
            st += self.stack_table[self.edge_buf[i]]
        if st > self.max_depth:
            st = self.max_depth
        cost[0] = self.base_cost + self.per_edge_cost * ne
        stack[0] = st
        cmp[0] = cm
        return ne

    cdef tuple _edges_tuple(self, Py_ssize_t ne):
        cdef Py_ssize_t i
        return tuple([self.edge_buf[i] for i in range(ne)])

    def run(self, bytes data):
        cdef int64_t cost, st, cm
        cdef Py_ssize_t ne = self.c_run(<const uint8_t*>(<char*>data), len(data), &cost, &st, &cm)
        return self._edges_tuple(ne), cost, st, cm


cdef class CoverageMap:
    cdef uint8_t* _virgin
    cdef uint32_t* counts
    cdef int64_t* touched
    cdef public Py_ssize_t size

    def __cinit__(self, Py_ssize_t size=65536):
        self.size = size
        self._virgin = <uint8_t*>malloc(size)
        self.counts = <uint32_t*>malloc(sizeof(uint32_t) * size)
        self.touched = <int64_t*>malloc(sizeof(int64_t) * size)
        memset(self._virgin, 0, size)
        memset(self.counts, 0, sizeof(uint32_t) * size)

    def __dealloc__(self):
        free(self._virgin); free(self.counts); free(self.touched)

    cdef int c_merge(self, const int64_t* edges, Py_ssize_t ne, bint update) noexcept nogil:
        cdef Py_ssize_t i, nt = 0
        cdef int64_t e
        cdef uint32_t c
        cdef uint8_t b
        cdef int new = 0
        for i in range(ne):
            e = edges[i]
            if e < 0 or e >= self.size:
                return -1
        for i in range(ne):
            e = edges[i]
            if self.counts[e] == 0:
                self.touched[nt] = e
                nt += 1
            self.counts[e] += 1
        for i in range(nt):
            e = self.touched[i]
            c = self.counts[e]
            self.counts[e] = 0
            if c <= 3:
                b = <uint8_t>c
            elif c <= 7:
                b = 4
            elif c <= 15:
                b = 5
            elif c <= 31:
                b = 6
            elif c <= 127:
                b = 7
            else:
                b = 8
            if b > self._virgin[e]:
                new = 1
                if update:
                    self._virgin[e] = b
        return new

    cdef int _py_merge(self, edges, bint update) except -2:
        cdef Py_ssize_t ne = len(edges), i
        cdef int64_t* buf = <int64_t*>malloc(sizeof(int64_t) * (ne + 1))
        cdef int r
        try:
            for i in range(ne):
                buf[i] = edges[i]
            r = self.c_merge(buf, ne, update)
        finally:
            free(buf)
        if r < 0:
            raise ValueError(f"edge id outside map of size {self.size}")
        return r

    def classify(self, edges):
        counts = {}
        for e in edges:
            if e < 0 or e >= self.size:
                raise ValueError(f"edge id {e} outside map of size {self.size}")
            counts[e] = counts.get(e, 0) + 1
        return sorted((e, hit_bucket(c)) for e, c in counts.items())

    def is_new(self, edges):
        return self._py_merge(edges, False) == 1

    def merge(self, edges):
        return self._py_merge(edges, True) == 1

    def get(self, Py_ssize_t edge):
        return self._virgin[edge]

    @property
    def virgin(self):
        return bytearray((<char*>self._virgin)[:self.size])

    def to_sparse(self):
        cdef Py_ssize_t i
        return {i: self._virgin[i] for i in range(self.size) if self._virgin[i]}

    def load_sparse(self, entries):
        memset(self._virgin, 0, self.size)
        for e, b in dict(entries).items():
            self._virgin[int(e)] = int(b)

    def count_edges(self):
        cdef Py_ssize_t i, c = 0
        for i in range(self.size):
            if self._virgin[i]:
                c += 1
        return c


def havoc_batch(TargetKernel target, CoverageMap covmap, bytes data, donor, Py_ssize_t n_trials,
                seed, int stack_pow2, Py_ssize_t max_len, int n_obj):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint8_t buf[C_BUF_CAP]
    cdef uint8_t scratch[C_BUF_CAP]
    cdef Py_ssize_t n0 = len(data), n, t, k, n_ops, off, ne, count = 0
    cdef int op, i, new
    cdef int64_t cost, st, cm
    cdef double[3] obs
    cdef double[3] sums
    cdef double[3] maxima
    cdef Py_ssize_t[C_N_OPS] op_counts
    cdef Py_ssize_t[C_N_POS] pos_counts
    cdef bytes d = donor if donor else b""
    cdef const uint8_t* dp = <const uint8_t*>(<char*>d)
    cdef Py_ssize_t dn = len(d)
    if n0 == 0 or n0 > max_len or max_len > C_BUF_CAP - 64:
        raise ValueError("input length outside [1, max_len]")
    if n_obj < 1 or n_obj > 3:
        raise ValueError("n_obj must be 1..3")
    for i in range(3):
        sums[i] = 0.0
        maxima[i] = 0.0
    memset(op_counts, 0, sizeof(op_counts))
    memset(pos_counts, 0, sizeof(pos_counts))
    new_inputs = []
    for t in range(n_trials):
        memcpy(buf, <const uint8_t*>(<char*>data), n0)
        n = n0
        n_ops = (<Py_ssize_t>1) << sm_below(&s, stack_pow2)
        for k in range(n_ops):
            op = <int>sm_below(&s, C_N_OPS)
            off = sm_below(&s, n)
            op_counts[op] += 1
            pos_counts[off * C_N_POS // n] += 1
            n = c_mutate(op, buf, n, off, &s, dp, dn, max_len, scratch)
        ne = target.c_run(buf, n, &cost, &st, &cm)
        count += 1
        obs[0] = 1e6 / <double>cost
        obs[1] = <double>st
        obs[2] = <double>cm
        for i in range(n_obj):
            sums[i] += obs[i]
            if obs[i] > maxima[i]:
                maxima[i] = obs[i]
        new = covmap.c_merge(target.edge_buf, ne, True)
        if new < 0:
            raise ValueError("edge id outside coverage map")
        if new:
            new_inputs.append(((<char*>buf)[:n], (target._edges_tuple(ne), cost, st, cm)))
    return (count, [sums[i] for i in range(n_obj)], [maxima[i] for i in range(n_obj)],
            new_inputs, [op_counts[i] for i in range(C_N_OPS)],
            [pos_counts[i] for i in range(C_N_POS)])


def nondominated_ranks(points):
    """Fast non-dominated sort (maximisation); 1-based ranks."""
    cdef Py_ssize_t n = len(points), m, p, q, k, i, head, tail
    if n == 0:
        return []
    m = len(points[0])
    cdef double* v = <double*>malloc(sizeof(double) * n * m + 1)
    cdef int* cnt = <int*>malloc(sizeof(int) * n)
    cdef char* rel = <char*>malloc(n * n)
    cdef int* rank = <int*>malloc(sizeof(int) * n)
    cdef int* queue = <int*>malloc(sizeof(int) * n)
    cdef bint ge_all, gt_any, le_all, lt_any
    cdef double a, b
    try:
        for p in range(n):
            row = points[p]
            if len(row) != m:
                raise ValueError("dimension mismatch")
            for k in range(m):
                v[p * m + k] = row[k]
        with nogil:
            memset(rel, 0, n * n)
            for p in range(n):
                cnt[p] = 0
                rank[p] = 0
            for p in range(n):
                for q in range(p + 1, n):
                    gt_any = False
                    lt_any = False
                    ge_all = True
                    le_all = True
                    for k in range(m):
                        a = v[p * m + k]
                        b = v[q * m + k]
                        if a < b:
                            ge_all = False
                            lt_any = True
                        elif a > b:
                            le_all = False
                            gt_any = True
                    if ge_all and gt_any:
                        rel[p * n + q] = 1
                        cnt[q] += 1
                    elif le_all and lt_any:
                        rel[q * n + p] = 1
                        cnt[p] += 1
            tail = 0
            for p in range(n):
                if cnt[p] == 0:
                    queue[tail] = <int>p
                    tail += 1
                    rank[p] = 1
            head = 0
            while head < tail:
                p = queue[head]
                head += 1
                for q in range(n):
                    if rel[p * n + q]:
                        cnt[q] -= 1
                        if cnt[q] == 0:
                            rank[q] = rank[p] + 1
                            queue[tail] = <int>q
                            tail += 1
        return [rank[i] for i in range(n)]
    finally:
        free(v); free(cnt); free(rel); free(rank); free(queue)
