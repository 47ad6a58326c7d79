"""Phase-space points and affine symplectic maps.

Coordinates are interleaved per mode, ``(q_1, p_1, q_2, p_2, ..., q_n, p_n)``,
with the vacuum Wigner function normalised as ``(2/pi) exp(-2(q^2 + p^2))``
(vacuum quadrature variance 1/4).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

SYMPLECTIC_TOL = 1e-9
GATE_TOL = 1e-12


def symplectic_form(n: int) -> np.ndarray:
    """Block-diagonal symplectic form for ``n`` modes in interleaved ordering."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_residual(matrix) -> float:
    """Max-abs entry of ``T^T J T - J``."""
    T = np.asarray(matrix, dtype=float)
    J = symplectic_form(T.shape[0] // 2)
    return float(np.max(np.abs(T.T @ J @ T - J)))


def spectral_norm(matrix) -> float:
    return float(np.linalg.norm(np.asarray(matrix, dtype=float), 2))


class PhasePoint:
    """A point of the 2n-dimensional phase space."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        arr = np.array(coords, dtype=float).reshape(-1)
        if arr.size < 2 or arr.size % 2:
            raise DimensionError(f"phase point needs 2n >= 2 coordinates, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("phase point coordinates must be finite")
        arr.setflags(write=False)
        self.coords = arr

    @property
    def modes(self) -> int:
        return self.coords.size // 2

    def mode(self, j: int) -> np.ndarray:
        return self.coords[2 * j : 2 * j + 2]

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __len__(self):
        return self.coords.size

    def __eq__(self, other):
        if not isinstance(other, PhasePoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __repr__(self):
        return f"PhasePoint({self.coords.tolist()})"


@dataclass(frozen=True, eq=False)
class AffineSymplecticMap:
    """The map ``u -> T u + x`` with ``T`` symplectic."""

    matrix: np.ndarray
    shift: np.ndarray
    tol: float = SYMPLECTIC_TOL

    def __post_init__(self):
        T = np.array(self.matrix, dtype=float)
        x = np.array(self.shift, dtype=float).reshape(-1)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] % 2 or T.shape[0] == 0:
            raise DimensionError(f"matrix must be 2n x 2n, got shape {T.shape}")
        if x.size != T.shape[0]:
            raise DimensionError(f"shift has {x.size} entries, matrix acts on {T.shape[0]}")
        if not (np.all(np.isfinite(T)) and np.all(np.isfinite(x))):
            raise ConfigError("map entries must be finite")
        residual = symplectic_residual(T)
        if residual > self.tol:
            raise ConfigError(f"matrix is not symplectic (residual {residual:.3e} > {self.tol:g})")
        T.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "matrix", T)
        object.__setattr__(self, "shift", x)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def norm(self) -> float:
        return spectral_norm(self.matrix)

    def apply(self, u):
        return apply_affine(self, u)

    def allclose(self, other: AffineSymplecticMap, atol=1e-12) -> bool:
        return bool(
            np.allclose(self.matrix, other.matrix, rtol=0, atol=atol)
            and np.allclose(self.shift, other.shift, rtol=0, atol=atol)
        )

    def __eq__(self, other):
        if not isinstance(other, AffineSymplecticMap):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix) and np.array_equal(self.shift, other.shift)

    def __repr__(self):
        return f"AffineSymplecticMap(modes={self.modes}, matrix={self.matrix.tolist()}, shift={self.shift.tolist()})"


def identity(n: int) -> AffineSymplecticMap:
    return AffineSymplecticMap(np.eye(2 * n), np.zeros(2 * n))


def apply_affine(amap: AffineSymplecticMap, u):
    """Return ``T u + x``.

    ``u`` may be a :class:`PhasePoint` (a PhasePoint is returned) or an array whose
    last axis has length 2n (an array is returned). Batched evaluation sums the
    columns in a fixed order so results do not depend on batch size.
    """
    if isinstance(u, PhasePoint):
        if u.coords.size != amap.matrix.shape[0]:
            raise DimensionError(f"point has {u.coords.size} coordinates, map acts on {amap.matrix.shape[0]}")
        return PhasePoint(_affine_rows(amap.matrix, amap.shift, u.coords[None, :])[0])
    arr = np.asarray(u, dtype=float)
    if arr.shape[-1] != amap.matrix.shape[0]:
        raise DimensionError(f"point has {arr.shape[-1]} coordinates, map acts on {amap.matrix.shape[0]}")
    flat = arr.reshape(-1, arr.shape[-1])
    return _affine_rows(amap.matrix, amap.shift, flat).reshape(arr.shape)


def _affine_rows(T, x, rows):
    out = np.empty_like(rows)
    for i in range(T.shape[0]):
        acc = np.full(rows.shape[0], x[i])
        for j in range(T.shape[1]):
            if T[i, j] != 0.0:
                acc = acc + T[i, j] * rows[:, j]
        out[:, i] = acc
    return out


def compose(second: AffineSymplecticMap, first: AffineSymplecticMap) -> AffineSymplecticMap:
    """The map applying ``first`` and then ``second``: ``(T2 T1, T2 x1 + x2)``."""
    if second.modes != first.modes:
        raise DimensionError(f"cannot compose maps on {second.modes} and {first.modes} modes")
    T = second.matrix @ first.matrix
    x = second.matrix @ first.shift + second.shift
    return AffineSymplecticMap(T, x)


def _check_mode(mode, n, name="mode"):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"mode count must be a positive integer, got {n!r}")
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < n:
        raise ConfigError(f"{name} index {mode!r} out of range for {n} modes")


def _embed(block, modes, n):
    T = np.eye(2 * n)
    idx = [c for m in modes for c in (2 * m, 2 * m + 1)]
    T[np.ix_(idx, idx)] = block
    return T


def phase_shifter(theta: float, mode: int, n: int) -> AffineSymplecticMap:
    """Rotate mode ``mode`` clockwise: ``(q, p) -> (q cos t + p sin t, -q sin t + p cos t)``."""
    _check_mode(mode, n)
    c, s = np.cos(theta), np.sin(theta)
    T = _embed(np.array([[c, s], [-s, c]]), [mode], n)
    return AffineSymplecticMap(T, np.zeros(2 * n), tol=GATE_TOL)


def beam_splitter(theta: float, mode_a: int, mode_b: int, n: int) -> AffineSymplecticMap:
    """Mix the (q_a, q_b) and (p_a, p_b) pairs by the rotation of angle ``theta``."""
    _check_mode(mode_a, n, "mode_a")
    _check_mode(mode_b, n, "mode_b")
    if mode_a == mode_b:
        raise ConfigError("beam splitter needs two distinct modes")
    c, s = np.cos(theta), np.sin(theta)
    block = np.array(
        [
            [c, 0.0, s, 0.0],
            [0.0, c, 0.0, s],
            [-s, 0.0, c, 0.0],
            [0.0, -s, 0.0, c],
        ]
    )
    T = _embed(block, [mode_a, mode_b], n)
    return AffineSymplecticMap(T, np.zeros(2 * n), tol=GATE_TOL)


def squeezer(r: float, mode: int, n: int) -> AffineSymplecticMap:
    """``(q, p) -> (e^r q, e^-r p)`` on one mode."""
    _check_mode(mode, n)
    T = _embed(np.diag([np.exp(r), np.exp(-r)]), [mode], n)
    return AffineSymplecticMap(T, np.zeros(2 * n), tol=GATE_TOL)


def displacement(dq: float, dp: float, mode: int, n: int) -> AffineSymplecticMap:
    _check_mode(mode, n)
    x = np.zeros(2 * n)
    x[2 * mode] = dq
    x[2 * mode + 1] = dp
    return AffineSymplecticMap(np.eye(2 * n), x, tol=GATE_TOL)
