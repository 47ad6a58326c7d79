# Compiled hot loops: counter-based uniforms and inverse-CDF cell search.
# Must stay bit-for-bit identical to _fallback.py.
from libc.stdint cimport uint64_t, int64_t

import numpy as np

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t traj) noexcept nogil:
    return <double>(_mix(key + (traj + 1) * GOLDEN) >> 11) * INV_2_53


def uniforms(uint64_t key, int64_t start, int64_t count):
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] view = out
    cdef int64_t i
    with nogil:
        for i in range(count):
            view[i] = _uniform(key, <uint64_t>(start + i))
    return out


def draw_cells(const double[::1] cdf, uint64_t key, int64_t start, int64_t count):
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] view = out
    cdef int64_t n = cdf.shape[0]
    cdef double total = cdf[n - 1]
    cdef double target
    cdef int64_t i, lo, hi, mid
    with nogil:
        for i in range(count):
            target = _uniform(key, <uint64_t>(start + i)) * total
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if cdf[mid] <= target:
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= n:
                lo = n - 1
            view[i] = lo
    return out
