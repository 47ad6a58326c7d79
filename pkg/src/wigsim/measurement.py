"""Separable Gaussian measurements and the Born-rule outcome density.

The conditional outcome density of one mode is

    M(k | u) = exp(-(k - u)^T V^{-1} (k - u)) / (pi sqrt(det V))

with no factor 1/2 in the exponent, so a measurement covariance ``V`` produces
Gaussian outcome noise of covariance ``V / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ResourceError
from .phase_space import AffineSymplecticMap, PhasePoint, apply_affine
from .quadrature import composite_rule
from .states import GRADIENT_SAFETY, gaussian_gradient_sup

EIGEN_FLOOR = 1e-6
HETERODYNE_COV = 0.5 * np.eye(2)
MAX_QUADRATURE_EVALS = 10**9


@dataclass(frozen=True, eq=False)
class GaussianMeasurementSpec:
    covs: tuple

    def __post_init__(self):
        covs = []
        for j, V in enumerate(self.covs):
            V = np.array(V, dtype=float)
            if V.shape != (2, 2) or not np.all(np.isfinite(V)):
                raise ConfigError("must be a finite 2x2 matrix", path=f"measurement[{j}]")
            if abs(V[0, 1] - V[1, 0]) > 1e-12:
                raise ConfigError("must be symmetric", path=f"measurement[{j}]")
            V = 0.5 * (V + V.T)
            if np.linalg.eigvalsh(V)[0] < EIGEN_FLOOR:
                raise ConfigError(
                    f"eigenvalues must be >= {EIGEN_FLOOR:g} (homodyne limits are not supported)",
                    path=f"measurement[{j}]",
                )
            V.setflags(write=False)
            covs.append(V)
        if not covs:
            raise ConfigError("measurement needs at least one mode")
        object.__setattr__(self, "covs", tuple(covs))

    @classmethod
    def heterodyne(cls, n: int) -> GaussianMeasurementSpec:
        return cls(tuple(HETERODYNE_COV for _ in range(n)))

    @property
    def modes(self) -> int:
        return len(self.covs)

    def outcome_covariance(self, j: int) -> np.ndarray:
        """Covariance of the outcome noise on mode ``j`` (``V / 2``)."""
        return self.covs[j] / 2

    def normalizer(self, j: int) -> float:
        return math.pi * math.sqrt(np.linalg.det(self.covs[j]))

    def peak(self, j: int) -> float:
        return 1.0 / self.normalizer(j)

    def gradient_sup(self, j: int) -> float:
        """Safety-scaled ``sup_k |grad_k M_j(k | u)|`` (exact Gaussian value times 1.25)."""
        return GRADIENT_SAFETY * gaussian_gradient_sup(self.outcome_covariance(j))

    def __eq__(self, other):
        if not isinstance(other, GaussianMeasurementSpec):
            return NotImplemented
        return len(self.covs) == len(other.covs) and all(
            np.array_equal(a, b) for a, b in zip(self.covs, other.covs)
        )


def mode_density(V, dq, dp):
    """One factor of the conditional density at offset ``(dq, dp) = k_j - u_j``."""
    V = np.asarray(V, dtype=float)
    Vi = np.linalg.inv(V)
    quad = Vi[0, 0] * dq * dq + 2 * Vi[0, 1] * dq * dp + Vi[1, 1] * dp * dp
    return np.exp(-quad) / (math.pi * math.sqrt(np.linalg.det(V)))


def conditional_density(spec: GaussianMeasurementSpec, k, u):
    """Product over modes of the per-mode outcome densities ``M_j(k_j | u_j)``.

    ``k`` and ``u`` may be PhasePoints or arrays with trailing axis 2n; they
    broadcast against each other.
    """
    k = np.asarray(k.coords if isinstance(k, PhasePoint) else k, dtype=float)
    u = np.asarray(u.coords if isinstance(u, PhasePoint) else u, dtype=float)
    dim = 2 * spec.modes
    if k.shape[-1] != dim or u.shape[-1] != dim:
        raise DimensionError(f"expected {dim} coordinates, got {k.shape[-1]} and {u.shape[-1]}")
    d = k - u
    out = 1.0
    for j, V in enumerate(spec.covs):
        out = out * mode_density(V, d[..., 2 * j], d[..., 2 * j + 1])
    return out


def mode_rule(w, panels: int | None = None, order: int = 8, panel_sigmas: float = 0.5):
    """Tensor Gauss-Legendre nodes over one state's support, with weights times W.

    Returns ``(nodes, weights)`` with ``nodes`` of shape (Q, 2).
    """
    h = w.default_half_width()
    if panels is None:
        sigma_min = math.sqrt(float(np.linalg.eigvalsh(w.covariance)[0]))
        panels = max(4, int(math.ceil(2 * h / (panel_sigmas * sigma_min))))
    q, wq = composite_rule(w.mean[0] - h, w.mean[0] + h, panels, order)
    p, wp = composite_rule(w.mean[1] - h, w.mean[1] + h, panels, order)
    Q, P = np.meshgrid(q, p, indexing="ij")
    weights = np.outer(wq, wp) * w.evaluate(Q, P)
    keep = weights != 0
    return np.column_stack([Q[keep], P[keep]]), weights[keep]


def joint_nodes(rules, chunk: int = 1 << 16):
    """Iterate over chunks ``(U, weights)`` of the product of per-mode rules."""
    sizes = [r[1].size for r in rules]
    total = int(np.prod(sizes))
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, sizes)
        U = np.concatenate([rules[j][0][idx[j]] for j in range(len(rules))], axis=1)
        wts = np.ones(flat.size)
        for j in range(len(rules)):
            wts = wts * rules[j][1][idx[j]]
        yield U, wts


def born_probability_density(states, amap: AffineSymplecticMap, spec: GaussianMeasurementSpec, k,
                             panels=None, order: int = 8, max_evals: int = MAX_QUADRATURE_EVALS):
    """Outcome density ``p(k) = integral W(u) M(k | T u + x) du`` by tensor quadrature.

    Supports one or two modes. ``k`` may be a single point or a batch (K, 2n).
    """
    n = amap.modes
    if len(states) != n or spec.modes != n:
        raise DimensionError("states, map and measurement disagree on the mode count")
    if n > 2:
        raise ResourceError(f"Born-rule quadrature supports at most 2 modes, got {n}")
    k = np.asarray(k.coords if isinstance(k, PhasePoint) else k, dtype=float)
    single = k.ndim == 1
    K = np.atleast_2d(k)
    if K.shape[1] != 2 * n:
        raise DimensionError(f"outcome has {K.shape[1]} coordinates, expected {2 * n}")
    rules = [mode_rule(w, panels, order) for w in states]
    work = K.shape[0] * int(np.prod([r[1].size for r in rules]))
    if work > max_evals:
        raise ResourceError(f"Born quadrature needs {work:.3g} evaluations (cap {max_evals:.3g})")
    dens = np.zeros(K.shape[0])
    for U, wts in joint_nodes(rules, chunk=max(1, (1 << 22) // K.shape[0])):
        V = apply_affine(amap, U)
        dens += conditional_density(spec, K[:, None, :], V[None, :, :]) @ wts
    return float(dens[0]) if single else dens
