"""Error-budget parameter selection and truncated grid distributions.

Given a total 1-norm budget ``epsilon`` the certified selector chooses a
truncation area ``|A|``, a grid side ``delta``, an oracle tolerance and an
affine-arithmetic budget satisfying

1. all means, covariances, ``||T||`` and ``||x||`` bounded;
2. ``|grad W| <= n beta / |A|^n`` and ``|grad M| <= n Lambda / |A|^n``;
3. ``delta <= min(eps / (16 [(1 + ||T||) Lambda + beta] n sqrt(2n)), Gamma)``;
4. ``eps < 1`` and affine rounding error ``<= ||T|| delta sqrt(n / 2)``;
5. ``|A| >= 16 n max_ij(tr V_rho_i + tr V_M_j) / eps``;
6. oracle tolerance ``<= eps / (8 n |A|^n)``.

The grid side ``sqrt|A|`` and the output bin ``Gamma`` are both odd multiples
of ``delta``, which centres the grid on the state mean and rules out
rebinning ties.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateGridError, DimensionError, ResourceError
from .measurement import GaussianMeasurementSpec
from .phase_space import AffineSymplecticMap, spectral_norm
from .states import WignerEvaluator

DEFAULT_MEMORY_CAP = 1 << 26
DEFAULT_STREAM_CAP = 1 << 36
BOUNDED_CAP = 1e6
_EPS = np.finfo(float).eps
_REL = 1e-12


def _check_epsilon(epsilon):
    if not (isinstance(epsilon, (int, float)) and 0 < epsilon < 1):
        raise ConfigError("epsilon must be in (0,1)", path="epsilon")


def area_lower_bound(epsilon, state_covs, meas_covs, n) -> float:
    _check_epsilon(epsilon)
    worst = max(np.trace(np.asarray(V)) for V in state_covs) + max(np.trace(np.asarray(V)) for V in meas_covs)
    return 16 * n * float(worst) / epsilon


def delta_upper_bound(epsilon, T_norm, beta, lam, n) -> float:
    return epsilon / (16 * ((1 + T_norm) * lam + beta) * n * math.sqrt(2 * n))


def oracle_tol_bound(epsilon, n, area) -> float:
    return epsilon / (8 * n * area**n)


def affine_precision_budget(T_norm, delta, n) -> float:
    return T_norm * delta * math.sqrt(n / 2)


def affine_rounding_bound(T, x, coord_bounds) -> float:
    """Euclidean bound on the rounding error of evaluating ``T u + x`` in doubles.

    Uses the standard dot-product bound ``gamma_k (|T| |u| + |x|)`` with
    ``k = 2n + 1`` terms per row and ``|u_j| <= coord_bounds[j]``.
    """
    T = np.asarray(T, dtype=float)
    k = T.shape[1] + 1
    gamma_k = k * _EPS / (1 - k * _EPS)
    per_row = gamma_k * (np.abs(T) @ np.asarray(coord_bounds, dtype=float) + np.abs(np.asarray(x, dtype=float)))
    return float(np.linalg.norm(per_row))


def joint_gradient_sup(grad_sups, peaks) -> float:
    """Bound on ``sup |grad prod_j f_j|`` from per-factor gradient and value sups."""
    total = 0.0
    for j, g in enumerate(grad_sups):
        others = np.prod([p for i, p in enumerate(peaks) if i != j]) if len(peaks) > 1 else 1.0
        total += (g * others) ** 2
    return math.sqrt(total)


@dataclass(frozen=True)
class Condition:
    number: int
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class DiscretizationParams:
    epsilon: float
    gamma: float
    delta: float
    area: float
    oracle_tol: float
    affine_precision: float
    beta: float
    lam: float
    mode: str
    modes: int
    gamma_ratio: int
    cells_per_side: int
    t_norm: float
    delta_bound: float
    area_bound: float
    oracle_tol_bound: float
    affine_error: float
    constants_declared: bool = False
    adjustments: tuple = ()
    conditions: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.gamma_ratio < 1 or self.gamma_ratio % 2 == 0:
            raise ConfigError(f"gamma must be an odd multiple of delta (ratio {self.gamma_ratio})")
        if self.cells_per_side % 2 == 0:
            raise ConfigError(f"sqrt|A| must be an odd multiple of delta ({self.cells_per_side} cells)")

    @property
    def side(self) -> float:
        return self.cells_per_side * self.delta

    @property
    def half_extent(self) -> int:
        return (self.cells_per_side - 1) // 2

    @property
    def cells(self) -> int:
        return self.cells_per_side**2

    @property
    def certified(self) -> bool:
        return bool(self.conditions) and all(c.passed for c in self.conditions)

    def condition(self, number: int) -> Condition:
        return next(c for c in self.conditions if c.number == number)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["conditions"] = [asdict(c) for c in self.conditions]
        out["adjustments"] = list(self.adjustments)
        out["side"] = self.side
        out["half_extent"] = self.half_extent
        out["cells_per_grid"] = self.cells
        out["certified"] = self.certified
        return out


def _odd_at_least(x: float) -> int:
    k = max(1, int(math.ceil(x - 1e-9)))
    return k if k % 2 else k + 1


def _odd_nearest(x: float) -> int:
    k = max(1, int(round(x)))
    return k if k % 2 else k + 1


def _gradient_constants(states, measurement, area, n):
    beta = joint_gradient_sup([w.declared_gradient_sup for w in states], [w.peak for w in states]) * area**n / n
    lam = joint_gradient_sup(
        [measurement.gradient_sup(j) for j in range(n)], [measurement.peak(j) for j in range(n)]
    ) * area**n / n
    return beta, lam


def _conditions(*, epsilon, gamma, delta, area, n, t_norm, shift, states, measurement, beta, lam,
                delta_bound, area_bound, tol_bound, oracle_tol, affine_error, declared, cap):
    size = [np.max(np.abs(w.mean)) for w in states]
    size += [np.linalg.norm(w.covariance, 2) for w in states]
    size += [np.linalg.norm(V, 2) for V in measurement.covs]
    size += [t_norm, float(np.linalg.norm(shift))]
    worst = float(max(size))
    budget = affine_precision_budget(t_norm, delta, n)
    eval_err = max(w.evaluation_error_bound() for w in states)
    return (
        Condition(1, "bounded inputs", bool(np.isfinite(worst) and worst <= cap),
                  f"largest of |mu|, ||V||, ||T||, ||x|| is {worst:.6g} (cap {cap:g})"),
        Condition(2, "gradient constants", bool(np.isfinite(beta) and np.isfinite(lam) and beta > 0 and lam > 0),
                  f"beta={beta:.6g}, Lambda={lam:.6g} ({'declared' if declared else 'derived from gradient sups'})"),
        Condition(3, "grid side", bool(delta <= min(delta_bound, gamma) * (1 + _REL)),
                  f"delta={delta:.6g} vs min(bound={delta_bound:.6g}, Gamma={gamma:.6g})"),
        Condition(4, "epsilon and affine precision", bool(epsilon < 1 and affine_error <= budget),
                  f"epsilon={epsilon:g}; rounding bound {affine_error:.3e} vs budget {budget:.3e}"),
        Condition(5, "truncation area", bool(area >= area_bound * (1 - _REL)),
                  f"|A|={area:.6g} vs bound {area_bound:.6g}"),
        Condition(6, "oracle tolerance", bool(oracle_tol <= tol_bound * (1 + _REL) and eval_err < oracle_tol),
                  f"oracle_tol={oracle_tol:.3e} vs bound {tol_bound:.3e}; evaluation error {eval_err:.3e}"),
    )


def select_parameters(epsilon, gamma_request, states, measurement: GaussianMeasurementSpec,
                      circuit: AffineSymplecticMap, mode: str = "certified", *, delta=None, area=None,
                      side=None, beta=None, lam=None, cap: float = BOUNDED_CAP) -> DiscretizationParams:
    """Resolve discretization parameters.

    ``mode="certified"`` derives everything from the error budget. ``mode="practical"``
    takes ``delta``, ``gamma_request`` and ``area`` (or ``side``) from the caller,
    only snapping them to odd multiples, and reports which conditions hold.
    ``beta``/``lam`` override the derived gradient constants.
    """
    _check_epsilon(epsilon)
    n = circuit.modes
    if len(states) != n or measurement.modes != n:
        raise DimensionError(f"{len(states)} states and {measurement.modes} measurement modes for a {n}-mode circuit")
    if not (gamma_request and gamma_request > 0 and math.isfinite(gamma_request)):
        raise ConfigError("gamma must be a positive number", path="gamma")
    if mode not in ("certified", "practical"):
        raise ConfigError(f"unknown discretization mode {mode!r}", path="discretization.mode")
    declared = beta is not None or lam is not None
    if declared and (beta is None or lam is None):
        raise ConfigError("beta and lambda must be given together", path="discretization")

    t_norm = spectral_norm(circuit.matrix)
    area_bound = area_lower_bound(epsilon, [w.covariance for w in states], measurement.covs, n)
    adjustments = []

    def constants(a):
        return (beta, lam) if declared else _gradient_constants(states, measurement, a, n)

    if mode == "certified":
        area_now = area_bound
        g = 1
        for _ in range(64):
            b, l_ = constants(area_now)
            bound = delta_upper_bound(epsilon, t_norm, b, l_, n)
            g = max(g, _odd_at_least(gamma_request / bound))
            d = gamma_request / g
            cells = _odd_at_least(math.sqrt(area_bound) / d)
            area_new = (cells * d) ** 2
            b2, l2 = constants(area_new)
            if d <= delta_upper_bound(epsilon, t_norm, b2, l2, n) * (1 + _REL):
                break
            area_now = area_new
            g += 2
        gamma = gamma_request
        delta_v = d
        if abs(cells * d - math.sqrt(area_bound)) > 0:
            adjustments.append(f"sqrt|A| rounded up from {math.sqrt(area_bound):.6g} to {cells} * delta")
    else:
        if delta is None or (area is None and side is None):
            raise ConfigError("practical mode needs delta and area (or side)", path="discretization")
        if not delta > 0:
            raise ConfigError("delta must be positive", path="discretization.delta")
        if gamma_request < delta * (1 - 1e-9):
            raise ConfigError(f"gamma={gamma_request} is smaller than delta={delta}", path="gamma")
        delta_v = float(delta)
        ratio = gamma_request / delta_v
        g = _odd_nearest(ratio)
        gamma = g * delta_v
        if abs(ratio - g) > 1e-9 * g:
            adjustments.append(f"gamma snapped from {gamma_request:g} to {g} * delta = {gamma:.6g}")
        side_v = float(side) if side is not None else math.sqrt(float(area))
        if not side_v > 0:
            raise ConfigError("area must be positive", path="discretization.area")
        cells = _odd_nearest(side_v / delta_v)
        if abs(cells * delta_v - side_v) > 1e-9 * side_v:
            adjustments.append(f"sqrt|A| snapped from {side_v:.6g} to {cells} * delta = {cells * delta_v:.6g}")

    area_v = (cells * delta_v) ** 2
    b, l_ = constants(area_v)
    bound = delta_upper_bound(epsilon, t_norm, b, l_, n)
    tol_bound = oracle_tol_bound(epsilon, n, area_v)
    oracle_tol = tol_bound
    coord_bounds = []
    for w in states:
        coord_bounds += [abs(w.mean[0]) + cells * delta_v / 2, abs(w.mean[1]) + cells * delta_v / 2]
    affine_error = affine_rounding_bound(circuit.matrix, circuit.shift, coord_bounds)
    conds = _conditions(
        epsilon=epsilon, gamma=gamma, delta=delta_v, area=area_v, n=n, t_norm=t_norm, shift=circuit.shift,
        states=states, measurement=measurement, beta=b, lam=l_, delta_bound=bound, area_bound=area_bound,
        tol_bound=tol_bound, oracle_tol=oracle_tol, affine_error=affine_error, declared=declared, cap=cap,
    )
    return DiscretizationParams(
        epsilon=float(epsilon), gamma=float(gamma), delta=delta_v, area=area_v, oracle_tol=oracle_tol,
        affine_precision=affine_precision_budget(t_norm, delta_v, n), beta=b, lam=l_, mode=mode, modes=n,
        gamma_ratio=g, cells_per_side=cells, t_norm=t_norm, delta_bound=bound, area_bound=area_bound,
        oracle_tol_bound=tol_bound, affine_error=affine_error, constants_declared=declared,
        adjustments=tuple(adjustments), conditions=conds,
    )


def resource_estimate(params: DiscretizationParams, memory_cap: int = DEFAULT_MEMORY_CAP) -> dict:
    grids = 2 * params.modes
    explicit = params.cells <= memory_cap
    return {
        "cells_per_grid": params.cells,
        "grids": grids,
        "storage": "explicit" if explicit else "streaming",
        "memory_bytes": 16 * params.cells * grids if explicit else 8 * params.cells_per_side * grids,
        "build_evaluations": params.cells * grids,
        "feasible": params.cells <= DEFAULT_STREAM_CAP,
    }


class GridDistribution:
    """Normalised weights over the ``(2L+1)^2`` cells centred on ``center``.

    Raw cell weights are ``max(value(l, m), 0) * delta^2``. Rows are indexed by
    ``l`` (the q offset) and columns by ``m`` (the p offset); the cumulative
    distribution walks rows in increasing ``l``. Grids above ``memory_cap``
    cells keep only per-row totals and recompute rows while sampling.
    """

    def __init__(self, center, delta, half_extent, cell_value, memory_cap=DEFAULT_MEMORY_CAP,
                 stream_cap=DEFAULT_STREAM_CAP):
        self.center = np.asarray(center, dtype=float)
        self.delta = float(delta)
        self.half_extent = int(half_extent)
        self.cell_value = cell_value
        side = 2 * self.half_extent + 1
        self.side_cells = side
        self.cells = side * side
        if self.cells > stream_cap:
            raise ResourceError(f"grid of {self.cells:.3g} cells exceeds the streaming cap {stream_cap:.3g}")
        self.explicit = self.cells <= memory_cap
        self._m = np.arange(-self.half_extent, self.half_extent + 1)
        row_totals = np.empty(side)
        raw_rows = [] if self.explicit else None
        cdf_rows = [] if self.explicit else None
        base = 0.0
        for i in range(side):
            raw, cum = self._row(i)
            row_totals[i] = cum[-1]
            if self.explicit:
                raw_rows.append(raw)
                cdf_rows.append(base + cum)
                base = base + cum[-1]
        self.row_end = np.cumsum(row_totals)
        self.row_base = np.concatenate([[0.0], self.row_end[:-1]])
        self.total = float(self.row_end[-1])
        if not self.total > 0:
            raise DegenerateGridError("grid has no mass inside the truncation region")
        if self.explicit:
            self.raw = np.vstack(raw_rows)
            self.cdf = np.concatenate(cdf_rows)
            if self.cdf[-1] != self.total:
                raise AssertionError("row-wise and flat cumulative sums disagree")

    def _row(self, i):
        l = i - self.half_extent
        vals = np.asarray(self.cell_value(np.full(self._m.shape, l), self._m), dtype=float)
        raw = np.maximum(vals, 0.0) * (self.delta * self.delta)
        return raw, np.cumsum(raw)

    @property
    def weights(self) -> np.ndarray:
        raw = self.raw if self.explicit else np.vstack([self._row(i)[0] for i in range(self.side_cells)])
        return raw / self.total

    def raw_weight(self, l, m):
        """Unnormalised weight ``max(value, 0) delta^2`` of cell (l, m)."""
        return np.maximum(np.asarray(self.cell_value(l, m), dtype=float), 0.0) * self.delta**2

    def weight(self, l, m):
        return self.raw_weight(l, m) / self.total

    def locate(self, uniforms) -> np.ndarray:
        """Flat cell index of each uniform: first cell whose cumulative mass exceeds ``u * total``."""
        targets = np.asarray(uniforms, dtype=float) * self.total
        if self.explicit:
            return np.minimum(np.searchsorted(self.cdf, targets, side="right"), self.cells - 1)
        rows = np.minimum(np.searchsorted(self.row_end, targets, side="right"), self.side_cells - 1)
        out = np.empty(targets.shape, dtype=np.int64)
        for i in np.unique(rows):
            sel = rows == i
            cum = self.row_base[i] + self._row(i)[1]
            cols = np.minimum(np.searchsorted(cum, targets[sel], side="right"), self.side_cells - 1)
            out[sel] = i * self.side_cells + cols
        return out

    def draw(self, key, start, count, backend):
        """Flat cell indices for trajectories ``start .. start+count-1`` of the stream ``key``."""
        if self.explicit:
            return backend.draw_cells(self.cdf, key, start, count)
        return self.locate(backend.uniforms(key, start, count))

    def cell_offsets(self, flat):
        flat = np.asarray(flat, dtype=np.int64)
        return flat // self.side_cells - self.half_extent, flat % self.side_cells - self.half_extent

    def cell_centers(self, flat):
        l, m = self.cell_offsets(flat)
        return self.center[0] + l * self.delta, self.center[1] + m * self.delta


def measurement_cell_value(V, delta):
    """Unnormalised measurement weight ``exp(-delta^2 (l, m) V^{-1} (l, m)^T)`` per cell."""
    Vi = np.linalg.inv(np.asarray(V, dtype=float))

    def value(l, m):
        dq = np.asarray(l, dtype=float) * delta
        dp = np.asarray(m, dtype=float) * delta
        return np.exp(-(Vi[0, 0] * dq * dq + 2 * Vi[0, 1] * dq * dp + Vi[1, 1] * dp * dp))

    return value


def build_grid_distribution(target, params: DiscretizationParams, memory_cap=DEFAULT_MEMORY_CAP,
                            stream_cap=DEFAULT_STREAM_CAP) -> GridDistribution:
    """Grid for a state (a :class:`WignerEvaluator`) or a measurement mode (a 2x2 covariance).

    State grids sit on the state mean; measurement grids sit on the origin and are
    shifted onto the evolved point when sampling.
    """
    if isinstance(target, WignerEvaluator):
        oracle = target.oracle(params.delta, params.oracle_tol)
        return GridDistribution(target.mean, params.delta, params.half_extent, oracle, memory_cap, stream_cap)
    V = np.asarray(target, dtype=float)
    if V.shape != (2, 2):
        raise TypeError("target must be a WignerEvaluator or a 2x2 measurement covariance")
    return GridDistribution((0.0, 0.0), params.delta, params.half_extent,
                            measurement_cell_value(V, params.delta), memory_cap, stream_cap)


def rebin(l, ratio: int):
    """Index ``r`` of the Gamma-bin holding delta-cell ``l`` when ``Gamma = ratio * delta``.

    With ``ratio`` odd, ``|l - ratio r| <= (ratio - 1) / 2`` and ties cannot occur.
    """
    if ratio < 1 or ratio % 2 == 0:
        raise ValueError("ratio must be an odd positive integer")
    return (np.asarray(l, dtype=np.int64) + ratio // 2) // ratio
