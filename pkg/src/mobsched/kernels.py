"""Kernel backend selection.

The compiled core is used when it imports; ``MOBSCHED_PURE_PYTHON=1`` forces
the pure-Python kernels.  Both produce bit-identical results.
"""

import os

from . import _pycore

if os.environ.get("MOBSCHED_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pycore
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _pycore

BACKEND = _impl.BACKEND

Rng64 = _impl.Rng64
TargetKernel = _impl.TargetKernel
CoverageMap = _impl.CoverageMap
apply_op = _impl.apply_op


def havoc_batch(target, covmap, data, donor, n_trials, seed, stack_pow2, max_len, n_obj):
    """Stacked-havoc batch; non-kernel executors (external harnesses) take the Python path."""
    if isinstance(target, _impl.TargetKernel):
        fn = _impl.havoc_batch
    else:
        fn = _pycore.havoc_batch
    return fn(target, covmap, data, donor, n_trials, seed, stack_pow2, max_len, n_obj)


nondominated_ranks = _impl.nondominated_ranks
crowding_distances = _impl.crowding_distances
hit_bucket = _pycore.hit_bucket
dominates = _pycore.dominates
objective_values = _pycore.objective_values
add_int = _pycore.add_int
flip_bits = _pycore.flip_bits

MAP_SIZE = _pycore.MAP_SIZE
MAX_INPUT_LEN = _pycore.MAX_INPUT_LEN
N_OPERATORS = _pycore.N_OPERATORS
N_POSITION_BUCKETS = _pycore.N_POSITION_BUCKETS
