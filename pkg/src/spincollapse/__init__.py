"""Matrix-free simulation of a spin measured by a nonlinear ferromagnet in a spin-glass bath."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, IntegrityError, SpinCollapseError, UsageError
from .model import CouplingSet, ModelConfig, build_couplings
from .solvers import (
    ChebyshevConfig,
    LanczosConfig,
    TrajectoryConfig,
    TrajectoryRecord,
    chebyshev_step,
    evolve,
    lanczos_ground_state,
)
from .observables import observe
from .experiment import Outcome, RunSpec, born_curve, classify_outcome, estimate_run_seconds, run_single

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "IntegrityError",
    "SpinCollapseError",
    "UsageError",
    "CouplingSet",
    "ModelConfig",
    "build_couplings",
    "ChebyshevConfig",
    "LanczosConfig",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "chebyshev_step",
    "evolve",
    "lanczos_ground_state",
    "observe",
    "Outcome",
    "RunSpec",
    "born_curve",
    "classify_outcome",
    "estimate_run_seconds",
    "run_single",
]
