"""Multi-camera 3D-free people tracking from 2D poses.

Pipeline: per-camera pose cleaning (:mod:`mvtrack.pose_preproc`), floor
localization (:mod:`mvtrack.geometry`), cross-view fusion
(:mod:`mvtrack.fusion`), world tracking (:mod:`mvtrack.tracker`) and
evaluation (:mod:`mvtrack.metrics`). :mod:`mvtrack.simulator` produces
synthetic data with known truth.
"""

from __future__ import annotations

from .assignment import INFEASIBLE, Assignment, gate_costs, solve
from .errors import MvtrackError, ValidationError
from .kernels import BACKEND

__all__ = ["BACKEND", "INFEASIBLE", "Assignment", "MvtrackError", "ValidationError", "gate_costs", "solve"]
__version__ = "0.1.0"
