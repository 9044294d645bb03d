"""Solver and adjoint-based optimal control toolkit for nonlocal scalar
conservation laws with an exponential convolution kernel."""

__version__ = "0.1.0"

from .mesh import (Grid, KernelWeights, SchemeParams, Velocity, build_grid,
                   build_kernel, constant_velocity, linear_velocity,
                   scheme_params)
from .convolution import nonlocal_direct, nonlocal_fast
from .forward import (Control, StateTrajectory, indicator_datum, mass,
                      solve_forward, step)
from .objectives import (ObjectiveSpec, Target, eval_objective, make_target,
                         terminal_adjoint)
from .adjoint import (AdjointTrajectory, GradientReport, gradient,
                      solve_adjoint, solve_adjoint_reference)
from .optimizer import IterationLog, OptimizerConfig, optimize, project
from .local_reference import LocalTrajectory, solve_local

__all__ = [
    "Grid", "KernelWeights", "SchemeParams", "Velocity",
    "build_grid", "build_kernel", "scheme_params",
    "constant_velocity", "linear_velocity",
    "nonlocal_direct", "nonlocal_fast",
    "Control", "StateTrajectory", "indicator_datum", "mass", "solve_forward",
    "step",
    "ObjectiveSpec", "Target", "eval_objective", "make_target",
    "terminal_adjoint",
    "AdjointTrajectory", "GradientReport", "gradient", "solve_adjoint",
    "solve_adjoint_reference",
    "IterationLog", "OptimizerConfig", "optimize", "project",
    "LocalTrajectory", "solve_local",
]
