"""Phase-space sampling of linear-optical circuits with positive-Wigner inputs and Gaussian measurements."""
from ._kernels import BACKEND
from .config import ExperimentConfig, build_run_config, compile_circuit, load_config, parse_config, serialize_config
from .discretization import DiscretizationParams, GridDistribution, build_grid_distribution, select_parameters
from .measurement import GaussianMeasurementSpec
from .oracle import DiscreteOutcomeDistribution, gaussian_output_law, histogram, tv_distance
from .phase_space import AffineSymplecticMap, PhasePoint, apply_affine, compose
from .sampler import RunConfig, Simulator, run_ensemble, run_trajectory
from .states import GaussianStateSpec, SpatsSpec, make_evaluator

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AffineSymplecticMap",
    "DiscreteOutcomeDistribution",
    "DiscretizationParams",
    "ExperimentConfig",
    "GaussianMeasurementSpec",
    "GaussianStateSpec",
    "GridDistribution",
    "PhasePoint",
    "RunConfig",
    "Simulator",
    "SpatsSpec",
    "apply_affine",
    "build_grid_distribution",
    "build_run_config",
    "compile_circuit",
    "compose",
    "gaussian_output_law",
    "histogram",
    "load_config",
    "make_evaluator",
    "parse_config",
    "run_ensemble",
    "run_trajectory",
    "select_parameters",
    "serialize_config",
    "tv_distance",
]
