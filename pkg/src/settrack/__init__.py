"""Multi-object tracking with a set-valued particle filter."""
from .assignment import Assignment, murty_k_best, ranked, solve_best
from .errors import AssignmentCapExceeded, DataError, InfeasibleAssignment, SetTrackError, SizeGuardError
from .identify import Identity, em_identify
from .kernels import BACKEND
from .metrics import GroundTruthFrame, MotReport, TrackFrame, clear_mot, trajectory_metrics
from .models import ModelParams
from .observation import DataAssociation, ObsResult, joint_likelihood, joint_likelihood_exact
from .sim import Scenario, simulate
from .tracker import Tracker

__version__ = "0.1.0"

__all__ = [
    "Assignment", "AssignmentCapExceeded", "BACKEND", "DataAssociation", "DataError", "GroundTruthFrame",
    "Identity", "InfeasibleAssignment", "ModelParams", "MotReport", "ObsResult", "Scenario", "SetTrackError",
    "SizeGuardError", "TrackFrame", "Tracker", "clear_mot", "em_identify", "joint_likelihood",
    "joint_likelihood_exact", "murty_k_best", "ranked", "simulate", "solve_best", "trajectory_metrics",
]
