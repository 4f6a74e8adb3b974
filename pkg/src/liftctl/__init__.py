"""Constraint lifting and backstepping control for discrete-time
strict-feedback systems with bounded states."""

from .admissibility import sample_regions, step_report
from .controller import CommandSignal, ControlDecision, GainSchedule, control
from .estimators import BacksteppingController, ConstraintLifter
from .exceptions import (
    ConfigError,
    DomainViolation,
    Exhausted,
    Inadmissible,
    InverseMismatch,
    LiftctlError,
    NonFinite,
    NoSwitch,
    SingularG,
)
from .lifted_dynamics import F1, F2, F1_inverse, F2_inverse, LiftedSystem
from .lifting import LiftedPoint, SigmoidPair, StateBounds, catalog, get_pair, lift, unlift
from .plant import PlantState, StrictFeedbackPlant, double_integrator, make_plant, step
from .sim import RunConfig, TrajectoryRecord, monte_carlo, run

__version__ = "0.1.0"

__all__ = [
    "BacksteppingController",
    "CommandSignal",
    "ConfigError",
    "ConstraintLifter",
    "ControlDecision",
    "DomainViolation",
    "Exhausted",
    "F1",
    "F1_inverse",
    "F2",
    "F2_inverse",
    "GainSchedule",
    "Inadmissible",
    "InverseMismatch",
    "LiftctlError",
    "LiftedPoint",
    "LiftedSystem",
    "NoSwitch",
    "NonFinite",
    "PlantState",
    "RunConfig",
    "SigmoidPair",
    "SingularG",
    "StateBounds",
    "StrictFeedbackPlant",
    "TrajectoryRecord",
    "catalog",
    "control",
    "double_integrator",
    "get_pair",
    "lift",
    "make_plant",
    "monte_carlo",
    "run",
    "sample_regions",
    "step",
    "step_report",
    "unlift",
]
