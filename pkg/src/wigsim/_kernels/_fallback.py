"""Pure numpy versions of the compiled kernels.

Both implementations produce identical bits: the integer hash is computed in
wrapping uint64 arithmetic and the cell search matches ``searchsorted(side="right")``.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(key, start, count):
    traj = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _mix(np.uint64(key) + traj * GOLDEN)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV_2_53


def draw_cells(cdf, key, start, count):
    cdf = np.asarray(cdf, dtype=np.float64)
    targets = uniforms(key, start, count) * cdf[-1]
    idx = np.searchsorted(cdf, targets, side="right")
    return np.minimum(idx, cdf.size - 1).astype(np.int64)
