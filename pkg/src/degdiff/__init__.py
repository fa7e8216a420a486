"""Solver and diagnostics for strongly degenerate nonlinear diffusion.

Implicit finite-difference solver for d/dt rho = Lap f(rho) with zero-flux
boundaries, a radial free-boundary oracle, and a diagnostics suite for
conservation, dissipation, monotonicity, decay rates, and segregation.
"""

from .flux import FluxFunction
from .grid import Grid2D, ScalarField, constant_field, lp_norm, mean, pos_part_excess
from .stepper import StepperConfig, StepRecord, run

__all__ = [
    "FluxFunction",
    "Grid2D",
    "ScalarField",
    "StepperConfig",
    "StepRecord",
    "constant_field",
    "lp_norm",
    "mean",
    "pos_part_excess",
    "run",
]

__version__ = "0.1.0"
