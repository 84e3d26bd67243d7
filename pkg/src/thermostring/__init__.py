"""Simulator and verification harness for the heated (thermoelastic) string."""

from .core import (
    Grid,
    ProblemConfig,
    Profile,
    StringState,
    diff_interior,
    make_grid,
    quadrature,
    second_diff,
    validate_initial,
)
from .diagnostics import DiagnosticsRow, SteadyStatePrediction

__all__ = [
    "DiagnosticsRow",
    "Grid",
    "ProblemConfig",
    "Profile",
    "SteadyStatePrediction",
    "StringState",
    "diff_interior",
    "make_grid",
    "quadrature",
    "second_diff",
    "validate_initial",
]
