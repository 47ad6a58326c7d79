"""Reference outcome distributions on a Gamma lattice and their comparison.

Bins are hypercubes of side ``gamma`` centred on ``origin + gamma * idx`` for
integer index vectors ``idx`` of length 2n.
"""
from __future__ import annotations

import json
import math

import numpy as np
from scipy.special import ndtr

from .errors import AccuracyError, ConfigError, DimensionError, OracleUnavailableError, ResourceError
from .measurement import MAX_QUADRATURE_EVALS, GaussianMeasurementSpec, mode_density, mode_rule
from .phase_space import AffineSymplecticMap, apply_affine
from .quadrature import bin_rules, gaussian_rule
from .states import GaussianWigner

REFINE_TOL = 1e-7
ALIGN_TOL = 1e-9


class DiscreteOutcomeDistribution:
    """Probabilities of Gamma-bins plus the mass ``tail`` that fell outside them."""

    def __init__(self, gamma, origin, bins, tail=0.0, meta=None):
        self.gamma = float(gamma)
        self.origin = np.asarray(origin, dtype=float).reshape(-1)
        self.bins = {tuple(int(i) for i in k): float(v) for k, v in dict(bins).items()}
        self.tail = float(tail)
        self.meta = dict(meta or {})
        if any(v < 0 for v in self.bins.values()):
            raise ValueError("bin probabilities must be nonnegative")
        if self.total > 1 + 1e-9:
            raise ValueError(f"bin probabilities sum to {self.total} > 1")

    @property
    def dimension(self) -> int:
        return self.origin.size

    @property
    def total(self) -> float:
        return math.fsum(self.bins.values())

    def __getitem__(self, idx):
        return self.bins.get(tuple(idx), 0.0)

    def to_dict(self) -> dict:
        rows = [[list(k), v] for k, v in sorted(self.bins.items())]
        return {"gamma": self.gamma, "origin": self.origin.tolist(), "tail": self.tail, "bins": rows}

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc) -> DiscreteOutcomeDistribution:
        return cls(doc["gamma"], doc["origin"], {tuple(k): v for k, v in doc["bins"]}, doc.get("tail", 0.0))

    @classmethod
    def load(cls, path) -> DiscreteOutcomeDistribution:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _dense_to_bins(prob, half_bins):
    """Dict of nonzero entries of a dense array indexed by offsets ``-h..h`` per axis."""
    nz = np.argwhere(prob > 0)
    vals = prob[tuple(nz.T)]
    offs = nz - np.asarray(half_bins)
    return {tuple(o): float(v) for o, v in zip(offs.tolist(), vals.tolist())}


def _half_bins(half_bins, dim):
    h = np.broadcast_to(np.asarray(half_bins, dtype=np.int64), (dim,)).copy()
    if np.any(h < 0):
        raise ConfigError("half_bins must be nonnegative")
    return h


def default_half_bins(cov, gamma, sigmas: float = 6.0):
    """Per-coordinate bin counts covering ``sigmas`` standard deviations around the mean."""
    sd = np.sqrt(np.diag(np.asarray(cov, dtype=float)))
    return np.ceil(sigmas * sd / gamma).astype(np.int64)


def gaussian_output_law(state_covs, state_means, amap: AffineSymplecticMap, meas_spec: GaussianMeasurementSpec):
    """Mean ``T mu + x`` and covariance ``T V T^T + V_M / 2`` of the outcome for Gaussian inputs."""
    n = amap.modes
    if len(state_covs) != n or len(state_means) != n or meas_spec.modes != n:
        raise DimensionError("states, map and measurement disagree on the mode count")
    mu = np.concatenate([np.asarray(m, dtype=float) for m in state_means])
    V = np.zeros((2 * n, 2 * n))
    VM = np.zeros((2 * n, 2 * n))
    for j in range(n):
        V[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = state_covs[j]
        VM[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = meas_spec.covs[j]
    T = amap.matrix
    return T @ mu + amap.shift, T @ V @ T.T + VM / 2


def output_law_of_states(states, amap, meas_spec):
    if not all(isinstance(w, GaussianWigner) for w in states):
        raise OracleUnavailableError("analytic output law needs Gaussian input states")
    return gaussian_output_law([w.covariance for w in states], [w.mean for w in states], amap, meas_spec)


def binned_gaussian(mean, cov, gamma, origin, half_bins, order: int | None = None) -> DiscreteOutcomeDistribution:
    """Mass of a Gaussian in each Gamma-bin.

    Diagonal covariances use exact normal-CDF differences; otherwise a tensor
    Gauss-Legendre rule of ``order`` points per axis is applied within each bin.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    origin = np.asarray(origin, dtype=float)
    dim = mean.size
    h = _half_bins(half_bins, dim)
    centers = [origin[i] + gamma * np.arange(-h[i], h[i] + 1) for i in range(dim)]
    off = cov - np.diag(np.diag(cov))
    if np.max(np.abs(off)) <= 1e-14 * np.max(np.abs(cov)):
        prob = np.ones(())
        for i in range(dim):
            sd = math.sqrt(cov[i, i])
            hi = ndtr((centers[i] + gamma / 2 - mean[i]) / sd)
            lo = ndtr((centers[i] - gamma / 2 - mean[i]) / sd)
            prob = np.multiply.outer(prob, hi - lo)
        method = "normal-cdf"
    else:
        order = order or (8 if dim <= 2 else 4)
        rules = [bin_rules(c, gamma, order) for c in centers]
        Ci = np.linalg.inv(cov)
        norm = 1.0 / math.sqrt((2 * math.pi) ** dim * np.linalg.det(cov))
        prob = np.zeros(tuple(2 * h + 1))
        grids = np.meshgrid(*[np.arange(o) for o in [order] * dim], indexing="ij")
        # loop over the node pattern inside a bin; vectorised over bins
        for pattern in zip(*[g.ravel() for g in grids]):
            pts = np.meshgrid(*[rules[i][0][:, pattern[i]] - mean[i] for i in range(dim)], indexing="ij")
            wt = np.ones(())
            for i in range(dim):
                wt = np.multiply.outer(wt, rules[i][1][:, pattern[i]])
            X = np.stack(pts, axis=-1)
            quad = np.einsum("...i,ij,...j->...", X, Ci, X)
            prob += wt * norm * np.exp(-0.5 * quad)
        method = f"gauss-legendre-{order}"
    prob = np.maximum(prob, 0.0)
    bins = _dense_to_bins(prob, h)
    total = math.fsum(bins.values())
    return DiscreteOutcomeDistribution(gamma, origin, bins, tail=max(0.0, 1 - total), meta={"method": method})


def _mode_bin_factor(V, vq, vp, cq, cp, gamma, order):
    """Integral of one mode's outcome density over each (q-bin, p-bin) for centres ``v``.

    Returns an array (len(cq) * len(cp), len(vq)).
    """
    if abs(V[0, 1]) <= 1e-14 * max(V[0, 0], V[1, 1]):
        sq, sp = math.sqrt(V[0, 0] / 2), math.sqrt(V[1, 1] / 2)
        fq = ndtr((cq[:, None] + gamma / 2 - vq[None, :]) / sq) - ndtr((cq[:, None] - gamma / 2 - vq[None, :]) / sq)
        fp = ndtr((cp[:, None] + gamma / 2 - vp[None, :]) / sp) - ndtr((cp[:, None] - gamma / 2 - vp[None, :]) / sp)
        return (fq[:, None, :] * fp[None, :, :]).reshape(-1, vq.size)
    nq, wq = bin_rules(cq, gamma, order)
    np_, wp = bin_rules(cp, gamma, order)
    out = np.zeros((cq.size, cp.size, vq.size))
    for a in range(order):
        for b in range(order):
            dq = nq[:, a][:, None, None] - vq[None, None, :]
            dp = np_[:, b][None, :, None] - vp[None, None, :]
            out += (wq[:, a][:, None, None] * wp[:, b][None, :, None]) * mode_density(V, dq, dp)
    return out.reshape(-1, vq.size)


def state_rule(w, resolution: int, order: int = 8):
    """Nodes and weights (times W) for integrating against one input state.

    States exposing a Gaussian envelope get a Gauss-Hermite rule with
    ``resolution`` nodes per axis, which is exact for the polynomial factor;
    others get ``resolution`` Gauss-Legendre panels over their support.
    """
    try:
        env = np.asarray(w.envelope_covariance(), dtype=float)
    except NotImplementedError:
        return mode_rule(w, resolution, order)
    nodes, weights = gaussian_rule(w.mean, env, resolution)
    d = nodes - w.mean
    Ei = np.linalg.inv(env)
    g = np.exp(-0.5 * np.einsum("ki,ij,kj->k", d, Ei, d)) / (2 * math.pi * math.sqrt(np.linalg.det(env)))
    return nodes, weights * w.evaluate(nodes[:, 0], nodes[:, 1]) / g


def _quadrature_pass(states, amap, spec, gamma, origin, h, resolution, order, chunk, max_evals):
    n = amap.modes
    rules = [state_rule(w, resolution, order) for w in states]
    sizes = [r[1].size for r in rules]
    U = int(np.prod(sizes))
    per_mode_bins = [(2 * h[2 * j] + 1) * (2 * h[2 * j + 1] + 1) for j in range(n)]
    # outcome-density evaluations: one CDF pair per bin for diagonal covariances, order^2 nodes otherwise
    cost = [1 if abs(spec.covs[j][0, 1]) <= 1e-14 * max(spec.covs[j][0, 0], spec.covs[j][1, 1]) else order**2
            for j in range(n)]
    work = U * sum(b * c for b, c in zip(per_mode_bins, cost))
    if work > max_evals:
        raise ResourceError(f"quadrature oracle needs {work:.3g} evaluations (cap {max_evals:.3g})")
    centers = [origin[i] + gamma * np.arange(-h[i], h[i] + 1) for i in range(2 * n)]
    acc = np.zeros(per_mode_bins) if n == 2 else np.zeros(per_mode_bins[0])
    for start in range(0, U, chunk):
        flat = np.arange(start, min(start + chunk, U))
        idx = np.unravel_index(flat, sizes)
        Uc = np.concatenate([rules[j][0][idx[j]] for j in range(n)], axis=1)
        wts = np.ones(flat.size)
        for j in range(n):
            wts = wts * rules[j][1][idx[j]]
        v = apply_affine(amap, Uc)
        G = [
            _mode_bin_factor(spec.covs[j], v[:, 2 * j], v[:, 2 * j + 1], centers[2 * j], centers[2 * j + 1], gamma, order)
            for j in range(n)
        ]
        if n == 1:
            acc += G[0] @ wts
        else:
            acc += (G[0] * wts) @ G[1].T
    shape = tuple(2 * h + 1)
    return acc.reshape(shape), int(work)


def quadrature_outcome_distribution(states, amap: AffineSymplecticMap, spec: GaussianMeasurementSpec, gamma,
                                    origin, half_bins, tol: float = REFINE_TOL, order: int = 8,
                                    resolution: int | None = None, max_evals: int = MAX_QUADRATURE_EVALS,
                                    max_rounds: int = 8) -> DiscreteOutcomeDistribution:
    """Born-rule bin probabilities by brute-force quadrature (one or two modes).

    The input density is integrated with :func:`state_rule` (Gauss-Hermite on the
    state's Gaussian envelope). The outcome density is integrated over each bin exactly
    (normal-CDF differences) when the measurement covariance is diagonal and by
    Gauss-Legendre otherwise. The per-axis node count ``resolution`` grows by half
    until every bin changes by at most ``tol``; ``max_evals`` caps outcome-density evaluations per pass.
    """
    n = amap.modes
    if len(states) != n or spec.modes != n:
        raise DimensionError("states, map and measurement disagree on the mode count")
    if n > 2:
        raise OracleUnavailableError(f"quadrature oracle supports at most 2 modes, got {n}")
    origin = np.asarray(origin, dtype=float)
    h = _half_bins(half_bins, 2 * n)
    if resolution is None:
        resolution = 24 if n == 1 else 12
    nb = int(np.prod(2 * h + 1)) if n == 1 else max((2 * h[0] + 1) * (2 * h[1] + 1), (2 * h[2] + 1) * (2 * h[3] + 1))
    chunk = max(256, (1 << 23) // max(nb, 1))
    prev, evals, history = None, 0, []
    for _ in range(max_rounds):
        try:
            cur, work = _quadrature_pass(states, amap, spec, gamma, origin, h, resolution, order, chunk, max_evals)
        except ResourceError:
            if prev is None:
                raise
            raise AccuracyError(
                f"quadrature did not settle to {tol:g} before the evaluation cap; "
                f"max bin change per round {history}"
            ) from None
        evals += work
        if prev is not None:
            change = float(np.max(np.abs(cur - prev)))
            history.append(change)
            if change <= tol:
                cur = np.maximum(cur, 0.0)
                bins = _dense_to_bins(cur, h)
                total = math.fsum(bins.values())
                meta = {"method": "quadrature", "nodes_per_axis": resolution, "refinement_change": change,
                        "evaluations": evals, "history": history}
                return DiscreteOutcomeDistribution(gamma, origin, bins, tail=max(0.0, 1 - total), meta=meta)
        prev = cur
        resolution = max(resolution + 1, int(math.ceil(1.5 * resolution)))
    raise AccuracyError(f"quadrature did not settle to {tol:g} in {max_rounds} rounds; changes {history}")


def oracle_distribution(states, amap, spec, gamma, origin, half_bins) -> DiscreteOutcomeDistribution:
    """Analytic law for Gaussian inputs, quadrature for up to two modes otherwise."""
    if all(isinstance(w, GaussianWigner) for w in states):
        mean, cov = output_law_of_states(states, amap, spec)
        return binned_gaussian(mean, cov, gamma, origin, half_bins)
    if amap.modes > 2:
        raise OracleUnavailableError(f"no oracle for {amap.modes} modes with non-Gaussian inputs")
    return quadrature_outcome_distribution(states, amap, spec, gamma, origin, half_bins)


def histogram(outcomes, gamma, origin, half_bins=None) -> DiscreteOutcomeDistribution:
    """Empirical frequencies of the nearest Gamma-bin; outcomes outside the region count as tail.

    ``outcomes`` may be an array (N, 2n), an object with an ``outcomes`` array,
    or an iterable of trajectory outcomes.
    """
    if hasattr(outcomes, "outcomes"):
        outcomes = outcomes.outcomes
    X = np.asarray(outcomes, dtype=float) if isinstance(outcomes, np.ndarray) else None
    if X is None:
        X = np.array([np.asarray(getattr(o, "outcome", o), dtype=float) for o in outcomes], dtype=float)
    X = np.atleast_2d(X)
    origin = np.asarray(origin, dtype=float).reshape(-1)
    if X.shape[1] != origin.size:
        raise DimensionError(f"outcomes have {X.shape[1]} coordinates, origin has {origin.size}")
    N = X.shape[0]
    idx = np.rint((X - origin) / gamma).astype(np.int64)
    if half_bins is not None:
        h = _half_bins(half_bins, origin.size)
        inside = np.all(np.abs(idx) <= h, axis=1)
    else:
        inside = np.ones(N, dtype=bool)
    keys, counts = np.unique(idx[inside], axis=0, return_counts=True)
    bins = {tuple(k): c / N for k, c in zip(keys.tolist(), counts.tolist())}
    return DiscreteOutcomeDistribution(gamma, origin, bins, tail=float(np.count_nonzero(~inside)) / N,
                                       meta={"samples": N})


def tv_distance(a: DiscreteOutcomeDistribution, b: DiscreteOutcomeDistribution):
    """Return ``(one_norm, tv)`` over the union of bins, tail masses included."""
    if abs(a.gamma - b.gamma) > ALIGN_TOL * a.gamma or a.dimension != b.dimension:
        raise ConfigError(f"distributions use different lattices (gamma {a.gamma} vs {b.gamma})")
    shift = (b.origin - a.origin) / a.gamma
    ishift = np.rint(shift)
    if np.max(np.abs(shift - ishift)) > ALIGN_TOL:
        raise ConfigError("bin lattices are not aligned: origins differ by a non-integer number of bins")
    ishift = ishift.astype(np.int64)
    bb = {tuple(int(i) for i in np.asarray(k) + ishift): v for k, v in b.bins.items()}
    keys = set(a.bins) | set(bb)
    one = math.fsum(abs(a.bins.get(k, 0.0) - bb.get(k, 0.0)) for k in keys) + abs(a.tail - b.tail)
    return one, one / 2


def max_bin_deviation(a: DiscreteOutcomeDistribution, b: DiscreteOutcomeDistribution):
    """Largest per-bin absolute difference and the index where it occurs (in ``a``'s frame)."""
    ishift = np.rint((b.origin - a.origin) / a.gamma).astype(np.int64)
    bb = {tuple(int(i) for i in np.asarray(k) + ishift): v for k, v in b.bins.items()}
    best, where = 0.0, None
    for k in set(a.bins) | set(bb):
        d = abs(a.bins.get(k, 0.0) - bb.get(k, 0.0))
        if d > best:
            best, where = d, k
    return best, where
