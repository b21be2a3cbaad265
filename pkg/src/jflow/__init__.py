"""Numerical laboratory for the generalized J-flow on flat periodic tori."""

from .errors import (ArgumentError, CalibrationError, ConfigError, GeometryError, JFlowError,
                     LedgerFormatError, NonConvergenceError, PreconditionError, ScenarioError,
                     StiffnessError)
from .flow import FlowConfig, GeometrySetup, compute_c, flow_rhs, make_state, run, step
from .geometry import HermFormField, PeriodicGrid, ScalarField

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "CalibrationError", "ConfigError", "GeometryError", "JFlowError", "LedgerFormatError",
    "NonConvergenceError", "PreconditionError", "ScenarioError", "StiffnessError",
    "FlowConfig", "GeometrySetup", "compute_c", "flow_rhs", "make_state", "run", "step",
    "HermFormField", "PeriodicGrid", "ScalarField",
]
