"""Spectral solver and estimate checks for the twisted complex Monge-Ampère
continuity path ``det(t omega + ddc log omega^n + ddc u) = e^u det omega`` on
flat and perturbed complex tori."""
from .errors import (InsufficientData, InvalidMetric, IterationLimit, NewtonDiverged,
                     NonFiniteField, NonPositiveDeterminant, ParseError, PositivityLost,
                     SingularMetric, TorusMAError)
from .grid import TorusGrid, set_threads
from .solver import ContinuityState, ProblemData, SolverConfig, solve_at_t
from .path import PathSchedule, choose_t1, extrapolate_volume, run_path
from .curvature import kappa_summary
from .estimates import EstimateRecord, EstimateReport, SuiteConfig, Tolerance

__version__ = "0.1.0"

__all__ = [
    "TorusGrid", "set_threads", "ProblemData", "ContinuityState", "SolverConfig", "solve_at_t",
    "PathSchedule", "choose_t1", "run_path", "extrapolate_volume", "kappa_summary",
    "EstimateRecord", "EstimateReport", "SuiteConfig", "Tolerance",
    "TorusMAError", "NonPositiveDeterminant", "SingularMetric", "NonFiniteField", "PositivityLost",
    "NewtonDiverged", "IterationLimit", "InsufficientData", "ParseError", "InvalidMetric",
]
