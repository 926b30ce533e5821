"""Energy-optimal pronking and bounding gaits for a planar quadruped.

The package couples an exact planar rigid-body model of a small quadruped
with hybrid-dynamics trajectory optimization (direct collocation over the
contact sequence of a gait), an event-driven simulator for cross-validation,
and post-processing for cost of transport, joint work and angular momentum.
"""

from .analysis import GaitMetrics, compute_metrics, momentum_trace
from .gaits import GAITS, HybridGait, gait_by_name
from .io import GaitLibrary, LibraryError
from .model import ModelError, RobotModel, build_model, default_model, load_model
from .simulator import SimOptions, cross_validate, cycle_residual, simulate
from .solver import SolveResult, SolverOptions, solve
from .sweep import GaitSolveOptions, solve_gait, speed_sweep
from .transcription import GaitSolution, Transcription, TranscriptionOptions

__all__ = [
    "GAITS",
    "GaitLibrary",
    "GaitMetrics",
    "GaitSolution",
    "GaitSolveOptions",
    "HybridGait",
    "LibraryError",
    "ModelError",
    "RobotModel",
    "SimOptions",
    "SolveResult",
    "SolverOptions",
    "Transcription",
    "TranscriptionOptions",
    "build_model",
    "compute_metrics",
    "cross_validate",
    "cycle_residual",
    "default_model",
    "gait_by_name",
    "load_model",
    "momentum_trace",
    "simulate",
    "solve",
    "solve_gait",
    "speed_sweep",
]

__version__ = "0.1.0"
