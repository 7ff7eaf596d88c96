"""Finite-time stabilization of LTV systems with unknown control direction by
extremum seeking: DLMI gain synthesis on the Lie-bracket averaged system,
dither-frequency estimates, and simulation-based verification."""

__version__ = "0.1.0"

from .core import (ControllerParams, FtsError, FtsProblem, MatrixSchedule, TimeGrid,  # noqa: E402
                   eval_schedule, validate_problem)

__all__ = ["ControllerParams", "FtsError", "FtsProblem", "MatrixSchedule", "TimeGrid",
           "eval_schedule", "validate_problem", "__version__"]
