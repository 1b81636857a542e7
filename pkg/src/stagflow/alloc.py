"""Array allocation funnel with a counter.

Every field-sized buffer in the package is created through :func:`zeros`,
so tests can assert that the time-stepping loop performs no per-step
allocations once its workspace is warm (library-internal transients such
as FFT plans are outside this accounting).
"""

import numpy as np

_count = 0


def zeros(shape, dtype):
    """Allocate a zero-initialized array and bump the allocation counter."""
    global _count
    _count += 1
    return np.zeros(shape, dtype=dtype)


def allocation_count():
    """Total number of arrays handed out since import (monotonic)."""
    return _count
