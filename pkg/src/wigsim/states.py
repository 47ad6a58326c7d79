"""Evaluatable Wigner functions of positive-Wigner single-mode states.

Two families are supported as sampler inputs: Gaussian states (vacuum, coherent,
thermal, squeezed, general) and loss-degraded single-photon-added thermal states
(LESPATS) with quantum efficiency at most 1/2. The LESPATS closed forms are
exposed for any efficiency so that negativity can be explored; only the
nonnegative ones are admitted as :class:`WignerEvaluator` instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError, RegionTooSmallError
from .quadrature import QuadratureSpec

VACUUM_VARIANCE = 0.25
MIN_DET = 1.0 / 16.0
GRADIENT_SAFETY = 1.25
_EPS = np.finfo(float).eps


def _as_pair(values, name):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size != 2 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be two finite numbers")
    arr.setflags(write=False)
    return arr


def _as_cov(values, name="covariance"):
    V = np.array(values, dtype=float)
    if V.shape != (2, 2) or not np.all(np.isfinite(V)):
        raise ConfigError(f"{name} must be a finite 2x2 matrix")
    if abs(V[0, 1] - V[1, 0]) > 1e-12:
        raise ConfigError(f"{name} must be symmetric")
    V = 0.5 * (V + V.T)
    V.setflags(write=False)
    return V


@dataclass(frozen=True, eq=False)
class GaussianStateSpec:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_pair(self.mean, "mean")
        V = _as_cov(self.cov)
        if np.linalg.eigvalsh(V)[0] <= 0:
            raise ConfigError("covariance must be positive definite")
        if np.linalg.det(V) < MIN_DET - 1e-12:
            raise ConfigError(
                f"covariance determinant {np.linalg.det(V):.6g} violates the uncertainty bound 1/16"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", V)

    def __eq__(self, other):
        if not isinstance(other, GaussianStateSpec):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)


def vacuum() -> GaussianStateSpec:
    return GaussianStateSpec((0.0, 0.0), VACUUM_VARIANCE * np.eye(2))


def coherent(q: float, p: float) -> GaussianStateSpec:
    return GaussianStateSpec((q, p), VACUUM_VARIANCE * np.eye(2))


def thermal(nbar: float) -> GaussianStateSpec:
    if nbar < 0:
        raise ConfigError("nbar must be >= 0")
    return GaussianStateSpec((0.0, 0.0), (2 * nbar + 1) * VACUUM_VARIANCE * np.eye(2))


def squeezed(r: float, phi: float = 0.0) -> GaussianStateSpec:
    """Vacuum squeezed by ``(q, p) -> (e^r q, e^-r p)`` and then rotated by ``phi``."""
    c, s = math.cos(phi), math.sin(phi)
    R = np.array([[c, s], [-s, c]])
    S = np.diag([math.exp(r), math.exp(-r)])
    cov = R @ S @ (VACUUM_VARIANCE * np.eye(2)) @ S.T @ R.T
    return GaussianStateSpec((0.0, 0.0), cov)


@dataclass(frozen=True)
class SpatsSpec:
    """Thermal mean photon number and quantum efficiency of a LESPATS."""

    nbar: float
    efficiency: float

    def __post_init__(self):
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ConfigError(f"nbar must be >= 0, got {self.nbar!r}")
        if not (math.isfinite(self.efficiency) and 0 <= self.efficiency <= 1):
            raise ConfigError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")


# --- closed forms ----------------------------------------------------------------


def gaussian_wigner(spec: GaussianStateSpec, q, p):
    """Bivariate normal density with the spec's mean and covariance."""
    dq = np.asarray(q, dtype=float) - spec.mean[0]
    dp = np.asarray(p, dtype=float) - spec.mean[1]
    a, b, c = spec.cov[0, 0], spec.cov[0, 1], spec.cov[1, 1]
    det = a * c - b * b
    quad = (c * dq * dq - 2 * b * dq * dp + a * dp * dp) / det
    return np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(det))


def lespats_wigner(spec: SpatsSpec, q, p):
    n, eta = spec.nbar, spec.efficiency
    r2 = np.asarray(q, dtype=float) ** 2 + np.asarray(p, dtype=float) ** 2
    width = 1 + 2 * n * eta
    numer = 1 + 2 * eta * (n + 2 * (n + 1) * r2 - 2 * n * eta - 1)
    return (2 / np.pi) * numer / width**3 * np.exp(-2 * r2 / width)


def lespats_origin(spec: SpatsSpec) -> float:
    """W(0, 0), the most negative value of the LESPATS Wigner function."""
    n, eta = spec.nbar, spec.efficiency
    return (2 / np.pi) * (1 + 2 * eta * (n - 2 * n * eta - 1)) / (1 + 2 * n * eta) ** 3


def lespats_p_function(spec: SpatsSpec, q, p):
    n, eta = spec.nbar, spec.efficiency
    if n == 0 or eta == 0:
        raise DomainError("the P-function is singular for nbar = 0 or efficiency = 0")
    r2 = np.asarray(q, dtype=float) ** 2 + np.asarray(p, dtype=float) ** 2
    return 1 / (np.pi * n**3 * eta) * ((n + 1) * r2 / eta - n) * np.exp(-r2 / (n * eta))


def q_function_vacuum(q, p):
    r2 = np.asarray(q, dtype=float) ** 2 + np.asarray(p, dtype=float) ** 2
    return np.exp(-r2) / np.pi


def fidelity_to_vacuum(spec: SpatsSpec) -> float:
    return (1 - spec.efficiency) / (1 + spec.nbar * spec.efficiency) ** 2


def fidelity_to_vacuum_quadrature(spec: SpatsSpec) -> float:
    """``pi * integral of P * Q`` over the plane, by adaptive radial quadrature.

    Both functions are rotationally symmetric, so the area element becomes
    ``pi ds`` in ``s = q^2 + p^2``.
    """
    if spec.nbar == 0 or spec.efficiency == 0:
        raise DomainError("quadrature path needs nbar > 0 and efficiency > 0")
    scale = spec.nbar * spec.efficiency / (1 + spec.nbar * spec.efficiency)

    def integrand(s):
        r = math.sqrt(s)
        return float(lespats_p_function(spec, r, 0.0) * q_function_vacuum(r, 0.0))

    upper = 80 * scale
    value, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-13, epsrel=1e-12, limit=200, points=[scale])
    return math.pi * math.pi * value


def is_positive_wigner(spec: SpatsSpec) -> bool:
    """True iff the LESPATS Wigner function is nonnegative everywhere.

    The numerator of W is ``(1 - 2 eta)(1 + 2 nbar eta) + 4 eta (nbar + 1) r^2``,
    minimal at the origin, so the sign is decided by ``1 - 2 eta``.
    """
    return 1 - 2 * spec.efficiency >= 0


# --- evaluators ------------------------------------------------------------------


class WignerEvaluator:
    """A nonnegative single-mode Wigner density usable as a sampler input."""

    kind: str
    mean: np.ndarray
    covariance: np.ndarray

    def evaluate(self, q, p):
        raise NotImplementedError

    def gradient(self, q, p):
        raise NotImplementedError

    def __call__(self, q, p):
        return self.evaluate(q, p)

    @property
    def peak(self) -> float:
        """Exact maximum value of the density."""
        raise NotImplementedError

    def _grid_gradient_max(self) -> float:
        raise NotImplementedError

    def envelope_covariance(self):
        """Covariance of a Gaussian ``g`` centred on the mean such that ``W / g`` is a polynomial."""
        raise NotImplementedError

    @cached_property
    def declared_gradient_sup(self) -> float:
        return sup_gradient(self)

    def default_half_width(self) -> float:
        """Half side of a square around the mean holding all but ~1e-14 of the mass."""
        return 8.5 * math.sqrt(float(np.linalg.eigvalsh(self.covariance)[-1]))

    def evaluation_error_bound(self) -> float:
        """Bound on the floating-point error of one closed-form evaluation."""
        return 256 * _EPS * self.peak

    def oracle(self, delta: float, tolerance: float) -> GridOracle:
        return GridOracle(self, delta, tolerance)


class GaussianWigner(WignerEvaluator):
    kind = "gaussian"

    def __init__(self, spec: GaussianStateSpec):
        self.spec = spec
        self.mean = spec.mean
        self.covariance = spec.cov

    def evaluate(self, q, p):
        return gaussian_wigner(self.spec, q, p)

    def gradient(self, q, p):
        W = self.evaluate(q, p)
        dq = np.asarray(q, dtype=float) - self.mean[0]
        dp = np.asarray(p, dtype=float) - self.mean[1]
        Vi = np.linalg.inv(self.covariance)
        return -W * (Vi[0, 0] * dq + Vi[0, 1] * dp), -W * (Vi[1, 0] * dq + Vi[1, 1] * dp)

    @property
    def peak(self) -> float:
        return 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(self.covariance)))

    def analytic_gradient_sup(self) -> float:
        return gaussian_gradient_sup(self.covariance)

    def envelope_covariance(self):
        return self.covariance

    def _grid_gradient_max(self) -> float:
        half = 4.0 * math.sqrt(float(np.linalg.eigvalsh(self.covariance)[-1]))
        axis = np.linspace(-half, half, 1201)
        Q, P = np.meshgrid(axis + self.mean[0], axis + self.mean[1], indexing="ij")
        gq, gp = self.gradient(Q, P)
        return float(np.max(np.hypot(gq, gp)))

    def __repr__(self):
        return f"GaussianWigner(mean={self.mean.tolist()}, cov={self.covariance.tolist()})"


class LespatsWigner(WignerEvaluator):
    kind = "lespats"

    def __init__(self, spec: SpatsSpec):
        if not is_positive_wigner(spec):
            raise ConfigError(
                f"LESPATS with efficiency {spec.efficiency} has a negative Wigner function; "
                "sampling requires efficiency <= 0.5"
            )
        self.spec = spec
        self.mean = np.zeros(2)
        self.mean.setflags(write=False)
        var = self._variance()
        self.covariance = var * np.eye(2)
        self.covariance.setflags(write=False)

    # W = A (c0 + c2 r^2) exp(-2 r^2 / a)
    @property
    def _coeffs(self):
        n, eta = self.spec.nbar, self.spec.efficiency
        a = 1 + 2 * n * eta
        c0 = 1 + 2 * eta * (n - 2 * n * eta - 1)
        c2 = 4 * eta * (n + 1)
        return 2 / (math.pi * a**3), a, c0, c2

    def _variance(self) -> float:
        _, a, c0, c2 = self._coeffs
        return c0 / (4 * a) + c2 / 4

    def evaluate(self, q, p):
        return lespats_wigner(self.spec, q, p)

    def envelope_covariance(self):
        return self._coeffs[1] / 4 * np.eye(2)

    def radial_derivative(self, r):
        A, a, c0, c2 = self._coeffs
        r = np.asarray(r, dtype=float)
        r2 = r * r
        return A * np.exp(-2 * r2 / a) * r * (2 * c2 - (4 / a) * (c0 + c2 * r2))

    def gradient(self, q, p):
        A, a, c0, c2 = self._coeffs
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        r2 = q * q + p * p
        g = A * np.exp(-2 * r2 / a) * (2 * c2 - (4 / a) * (c0 + c2 * r2))
        return g * q, g * p

    @property
    def peak(self) -> float:
        A, a, c0, c2 = self._coeffs
        s = max(a / 2 - c0 / c2, 0.0) if c2 > 0 else 0.0
        return A * (c0 + c2 * s) * math.exp(-2 * s / a)

    def _grid_gradient_max(self) -> float:
        r = np.linspace(0.0, 10 * math.sqrt(self._coeffs[1]), 200001)
        return float(np.max(np.abs(self.radial_derivative(r))))

    def __repr__(self):
        return f"LespatsWigner(nbar={self.spec.nbar}, efficiency={self.spec.efficiency})"


def make_evaluator(spec) -> WignerEvaluator:
    if isinstance(spec, GaussianStateSpec):
        return GaussianWigner(spec)
    if isinstance(spec, SpatsSpec):
        return LespatsWigner(spec)
    raise TypeError(f"no evaluator for {type(spec).__name__}")


def gaussian_gradient_sup(cov) -> float:
    """Exact ``sup |grad N(0, cov)|`` = ``e^{-1/2} / (2 pi sqrt(det V) sqrt(lambda_min))``."""
    V = np.asarray(cov, dtype=float)
    lam_min = float(np.linalg.eigvalsh(V)[0])
    return math.exp(-0.5) / (2 * math.pi * math.sqrt(np.linalg.det(V)) * math.sqrt(lam_min))


def sup_gradient(w: WignerEvaluator) -> float:
    """Upper bound on ``sup |grad W|``: fine-grid maximum times a 1.25 safety factor.

    For Gaussians the grid maximum is cross-checked against the exact supremum.
    """
    grid_max = w._grid_gradient_max()
    bound = GRADIENT_SAFETY * grid_max
    if isinstance(w, GaussianWigner):
        exact = w.analytic_gradient_sup()
        if not (grid_max <= exact * (1 + 1e-9) and bound >= exact):
            raise AssertionError(f"gradient grid search {grid_max} inconsistent with exact {exact}")
    return bound


@dataclass(frozen=True)
class GridOracle:
    """Finite-precision oracle returning W at ``mean + (l, m) delta``.

    The closed forms are evaluated in double precision; construction fails if
    their rounding error could reach ``tolerance``.
    """

    evaluator: WignerEvaluator
    delta: float
    tolerance: float
    error_bound: float = field(init=False)

    def __post_init__(self):
        bound = self.evaluator.evaluation_error_bound()
        if not bound < self.tolerance:
            raise ConfigError(
                f"oracle tolerance {self.tolerance:.3e} is below the evaluation error bound {bound:.3e}"
            )
        object.__setattr__(self, "error_bound", bound)

    def __call__(self, l, m):
        q = self.evaluator.mean[0] + np.asarray(l, dtype=float) * self.delta
        p = self.evaluator.mean[1] + np.asarray(m, dtype=float) * self.delta
        return self.evaluator.evaluate(q, p)


def numeric_moments(w: WignerEvaluator, grid: QuadratureSpec | None = None, mass_tol: float = 1e-6):
    """Mean and covariance of ``w`` by tensor-grid quadrature."""
    if grid is None:
        grid = QuadratureSpec(tuple(w.mean), w.default_half_width(), panels=40, order=8)
    Q, P, Wt = grid.nodes()
    dens = w.evaluate(Q, P) * Wt
    mass = float(dens.sum())
    if abs(1 - mass) > mass_tol:
        raise RegionTooSmallError(f"quadrature region captures mass {mass:.10f}; deficit exceeds {mass_tol:g}")
    mean = np.array([np.sum(dens * Q), np.sum(dens * P)]) / mass
    dq, dp = Q - mean[0], P - mean[1]
    cqq = np.sum(dens * dq * dq) / mass
    cqp = np.sum(dens * dq * dp) / mass
    cpp = np.sum(dens * dp * dp) / mass
    return mean, np.array([[cqq, cqp], [cqp, cpp]])


def outside_mass(w: WignerEvaluator, side: float, center=None, panels: int = 24, order: int = 10) -> float:
    """Probability mass of ``w`` outside the square of side ``side`` about ``center``.

    The complement is split into four rectangles inside a box wide enough for
    the tails to vanish in double precision, and each is integrated directly.
    """
    from .quadrature import integrate_rect

    c = np.asarray(w.mean if center is None else center, dtype=float)
    h = side / 2
    far = h + 2 * w.default_half_width() + 10.0
    f = w.evaluate
    return (
        integrate_rect(f, c[0] + h, c[0] + far, c[1] - far, c[1] + far, panels, order)
        + integrate_rect(f, c[0] - far, c[0] - h, c[1] - far, c[1] + far, panels, order)
        + integrate_rect(f, c[0] - h, c[0] + h, c[1] + h, c[1] + far, panels, order)
        + integrate_rect(f, c[0] - h, c[0] + h, c[1] - far, c[1] - h, panels, order)
    )
