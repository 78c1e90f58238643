"""Particle-filter pose tracking that keeps objects alive while they are hidden."""
from .errors import (DegenerateUpdateError, InsufficientHistoryError, InvalidConfigError,
                     InvalidInputError, NoCandidateError, NumericalSingularityError, OpfError,
                     ScenarioError)
from .feedback import FeedbackConfig, SafetyMonitor, sigmoid_gain, tracking_command, uncertainty
from .harness import RunConfig, ResultLog, compare_report, error_distance, run_experiment
from .op_update import Ensemble, OpConfig
from .particle_filter import NoiseModel, ParticleFilter
from .pose_math import AxisAngle, Pose6DoF, TrajectoryBuffer
from .scenario import ScenarioSpec, load_scenario

__version__ = "0.1.0"

__all__ = [
    "AxisAngle", "DegenerateUpdateError", "Ensemble", "FeedbackConfig", "InsufficientHistoryError",
    "InvalidConfigError", "InvalidInputError", "NoCandidateError", "NoiseModel",
    "NumericalSingularityError", "OpConfig", "OpfError", "ParticleFilter", "Pose6DoF",
    "ResultLog", "RunConfig", "SafetyMonitor", "ScenarioError", "ScenarioSpec",
    "TrajectoryBuffer", "compare_report", "error_distance", "load_scenario", "run_experiment",
    "sigmoid_gain", "tracking_command", "uncertainty",
]
