"""Trajectory sampler: grid draw of the input, affine evolution, grid draw of the outcome.

Every trajectory reads one uniform from each of ``2n`` counter-based streams
(state mode ``j`` uses stream ``j``, measurement mode ``j`` uses ``n + j``) at
counter value ``trajectory_index``. Outcomes are therefore a pure function of
``(seed, trajectory_index)`` and do not depend on batching or thread count.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .discretization import (
    DEFAULT_MEMORY_CAP,
    DEFAULT_STREAM_CAP,
    DiscretizationParams,
    build_grid_distribution,
    rebin,
    resource_estimate,
)
from .errors import AccuracyError, ConfigError, DimensionError, ResourceError
from .measurement import GaussianMeasurementSpec
from .phase_space import AffineSymplecticMap, PhasePoint, apply_affine

CHUNK = 1 << 15
MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class RunConfig:
    states: tuple
    circuit: AffineSymplecticMap
    measurement: GaussianMeasurementSpec
    params: DiscretizationParams
    samples: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        n = self.circuit.modes
        if len(self.states) != n or self.measurement.modes != n or self.params.modes != n:
            raise DimensionError(
                f"mode counts disagree: {len(self.states)} states, circuit {n}, "
                f"measurement {self.measurement.modes}, params {self.params.modes}"
            )
        if not isinstance(self.samples, (int, np.integer)) or self.samples < 1:
            raise ConfigError("samples must be a positive integer", path="samples")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed must be an integer in [0, 2^64)", path="seed")

    @property
    def modes(self) -> int:
        return self.circuit.modes


@dataclass(frozen=True)
class TrajectoryOutcome:
    trajectory_index: int
    outcome: PhasePoint
    u_tilde: PhasePoint
    state_cells: tuple
    measurement_cells: tuple
    bins: tuple


class TrajectoryRNG:
    """Uniforms of one trajectory: stream ``s`` evaluated at counter ``index``."""

    def __init__(self, seed: int, index: int, backend=None):
        self.seed = int(seed)
        self.index = int(index)
        self.backend = backend or _kernels.backend

    def uniform(self, stream: int) -> float:
        return float(self.backend.uniforms(_kernels.stream_key(self.seed, stream), self.index, 1)[0])


def sample_initial(grids, rng: TrajectoryRNG):
    """Draw one cell per mode; returns ``(u, cells)`` with ``u_j = mu_j + delta (l, m)``."""
    coords, cells = [], []
    for j, grid in enumerate(grids):
        flat = grid.locate(np.array([rng.uniform(j)]))
        l, m = grid.cell_offsets(flat)
        cells.append((int(l[0]), int(m[0])))
        coords += [grid.center[0] + l[0] * grid.delta, grid.center[1] + m[0] * grid.delta]
    return PhasePoint(coords), tuple(cells)


def sample_measurement(meas_grids, u_tilde: PhasePoint, gamma: float, gamma_ratio: int, rng: TrajectoryRNG,
                       trajectory_index: int = 0, state_cells=()) -> TrajectoryOutcome:
    """Draw the outcome offset on each mode's measurement grid and snap it to the Gamma lattice."""
    n = len(meas_grids)
    k, cells, bins = [], [], []
    for j, grid in enumerate(meas_grids):
        flat = grid.locate(np.array([rng.uniform(n + j)]))
        l, m = grid.cell_offsets(flat)
        r, s = int(rebin(l, gamma_ratio)[0]), int(rebin(m, gamma_ratio)[0])
        cells.append((int(l[0]), int(m[0])))
        bins.append((r, s))
        uq, up = u_tilde.mode(j)
        k += [uq + gamma * r, up + gamma * s]
    return TrajectoryOutcome(trajectory_index, PhasePoint(k), u_tilde, tuple(state_cells), tuple(cells), tuple(bins))


@dataclass
class EnsembleResult:
    indices: np.ndarray
    outcomes: np.ndarray
    u_tilde: np.ndarray
    bins: np.ndarray

    @property
    def modes(self) -> int:
        return self.outcomes.shape[1] // 2

    def summary(self) -> dict:
        x = self.outcomes
        N = x.shape[0]
        mean = x.mean(axis=0)
        d = x - mean
        cov = d.T @ d / max(N - 1, 1)
        # standard error of each covariance entry from the fourth moments
        prod = d[:, :, None] * d[:, None, :]
        cov_se = np.sqrt(np.maximum(prod.var(axis=0), 0) / N)
        per_mode = []
        for j in range(self.modes):
            sl = slice(2 * j, 2 * j + 2)
            per_mode.append({"mean": mean[sl].tolist(), "covariance": cov[sl, sl].tolist()})
        return {
            "count": int(N),
            "mean": mean.tolist(),
            "mean_standard_error": (np.sqrt(np.diag(cov) / N)).tolist(),
            "covariance": cov.tolist(),
            "covariance_standard_error": cov_se.tolist(),
            "modes": per_mode,
        }

    def trajectory(self, i: int) -> TrajectoryOutcome:
        n = self.modes
        bins = tuple((int(self.bins[i, 2 * j]), int(self.bins[i, 2 * j + 1])) for j in range(n))
        return TrajectoryOutcome(int(self.indices[i]), PhasePoint(self.outcomes[i]), PhasePoint(self.u_tilde[i]),
                                 (), (), bins)


def write_outcomes(result: EnsembleResult, path, fmt: str = "csv"):
    """Write one record per trajectory in index order; floats use shortest round-trip repr."""
    n = result.modes
    if fmt == "csv":
        names = ["trajectory_index"] + [f"{c}_{j + 1}" for j in range(n) for c in ("q", "p")]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(names) + "\n")
            for i, row in zip(result.indices.tolist(), result.outcomes.tolist()):
                fh.write(str(i) + "," + ",".join(map(repr, row)) + "\n")
    elif fmt == "jsonl":
        with open(path, "w", newline="\n") as fh:
            for i, row in zip(result.indices.tolist(), result.outcomes.tolist()):
                fh.write(json.dumps({"trajectory_index": i, "outcome": row}) + "\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r} (use csv or jsonl)")


def read_outcomes(path) -> np.ndarray:
    """Outcome rows (without the index column) from a CSV or JSON-lines file."""
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("{"):
            rows = [json.loads(first)["outcome"]] + [json.loads(line)["outcome"] for line in fh if line.strip()]
            return np.array(rows, dtype=float)
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, 1:]


class Simulator:
    """Prepared grids for a :class:`RunConfig`; grids are immutable and shared across threads."""

    def __init__(self, config: RunConfig, memory_cap: int = DEFAULT_MEMORY_CAP, backend=None):
        self.config = config
        self.backend = backend if backend is not None else _kernels.backend
        params = config.params
        if params.affine_error > params.affine_precision:
            raise AccuracyError(
                f"double-precision affine error bound {params.affine_error:.3e} exceeds "
                f"the budget {params.affine_precision:.3e}"
            )
        est = resource_estimate(params, memory_cap)
        if not est["feasible"]:
            raise ResourceError(
                f"grid of {params.cells:.3g} cells per mode exceeds the streaming cap {DEFAULT_STREAM_CAP:.3g}"
            )
        self.resources = est
        self.state_grids = tuple(build_grid_distribution(w, params, memory_cap) for w in config.states)
        cache = {}
        grids = []
        for V in config.measurement.covs:
            key = V.tobytes()
            if key not in cache:
                cache[key] = build_grid_distribution(V, params, memory_cap)
            grids.append(cache[key])
        self.meas_grids = tuple(grids)
        n = config.modes
        self.state_keys = [_kernels.stream_key(config.seed, j) for j in range(n)]
        self.meas_keys = [_kernels.stream_key(config.seed, n + j) for j in range(n)]

    def rng(self, index: int) -> TrajectoryRNG:
        return TrajectoryRNG(self.config.seed, index, self.backend)

    def run_trajectory(self, index: int) -> TrajectoryOutcome:
        rng = self.rng(index)
        u, cells = sample_initial(self.state_grids, rng)
        ut = apply_affine(self.config.circuit, u)
        p = self.config.params
        return sample_measurement(self.meas_grids, ut, p.gamma, p.gamma_ratio, rng, index, cells)

    def sample_block(self, start: int, count: int):
        """Vectorised trajectories ``start .. start+count-1``: (u_tilde, k, bins)."""
        n = self.config.modes
        p = self.config.params
        u = np.empty((count, 2 * n))
        for j, grid in enumerate(self.state_grids):
            l, m = grid.cell_offsets(grid.draw(self.state_keys[j], start, count, self.backend))
            u[:, 2 * j] = grid.center[0] + l * grid.delta
            u[:, 2 * j + 1] = grid.center[1] + m * grid.delta
        ut = apply_affine(self.config.circuit, u)
        k = np.empty_like(ut)
        bins = np.empty((count, 2 * n), dtype=np.int64)
        for j, grid in enumerate(self.meas_grids):
            l, m = grid.cell_offsets(grid.draw(self.meas_keys[j], start, count, self.backend))
            bins[:, 2 * j] = rebin(l, p.gamma_ratio)
            bins[:, 2 * j + 1] = rebin(m, p.gamma_ratio)
            k[:, 2 * j] = ut[:, 2 * j] + p.gamma * bins[:, 2 * j]
            k[:, 2 * j + 1] = ut[:, 2 * j + 1] + p.gamma * bins[:, 2 * j + 1]
        return ut, k, bins

    def run_ensemble(self, threads: int = 1, samples: int | None = None, chunk: int = CHUNK) -> EnsembleResult:
        N = self.config.samples if samples is None else int(samples)
        starts = list(range(0, N, chunk))
        jobs = [(s, min(chunk, N - s)) for s in starts]
        if threads and threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda job: self.sample_block(*job), jobs))
        else:
            parts = [self.sample_block(*job) for job in jobs]
        return EnsembleResult(
            indices=np.arange(N, dtype=np.int64),
            u_tilde=np.concatenate([q[0] for q in parts]),
            outcomes=np.concatenate([q[1] for q in parts]),
            bins=np.concatenate([q[2] for q in parts]),
        )


def run_trajectory(config: RunConfig, trajectory_index: int) -> TrajectoryOutcome:
    return Simulator(config).run_trajectory(trajectory_index)


def run_ensemble(config: RunConfig, threads: int = 1, memory_cap: int = DEFAULT_MEMORY_CAP) -> EnsembleResult:
    return Simulator(config, memory_cap).run_ensemble(threads)


__all__ = [
    "EnsembleResult",
    "RunConfig",
    "Simulator",
    "TrajectoryOutcome",
    "TrajectoryRNG",
    "read_outcomes",
    "run_ensemble",
    "run_trajectory",
    "sample_initial",
    "sample_measurement",
    "write_outcomes",
]
