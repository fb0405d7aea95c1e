"""Solvers for differential equations with the Caputo-Fabrizio fractional derivative."""

__version__ = "0.1.0"

from .cf_operator import CFOrder, cf_d_2gamma, cf_d_beta, cf_d_gamma
from .errors import CFOdeError
from .exprparse import differentiate, evaluate, parse
from .linear_solver import (
    CaseTag,
    LinearProblem,
    ReducedODE,
    Solution,
    discriminant_case,
    reduce,
    reduce_general,
    solve,
)
from .msd import MSDParams, VolterraProblem, msd_reduce, solve_msd, volterra_solve
from .nonlinear_solver import NonlinearProblem, PicardState, apply_N, contraction_check, picard_solve
from .quadrature import Grid, GridFunction, cumulative_integral, derivative, second_derivative

__all__ = [
    "CFOrder", "cf_d_2gamma", "cf_d_beta", "cf_d_gamma",
    "CFOdeError",
    "differentiate", "evaluate", "parse",
    "CaseTag", "LinearProblem", "ReducedODE", "Solution", "discriminant_case", "reduce", "reduce_general", "solve",
    "MSDParams", "VolterraProblem", "msd_reduce", "solve_msd", "volterra_solve",
    "NonlinearProblem", "PicardState", "apply_N", "contraction_check", "picard_solve",
    "Grid", "GridFunction", "cumulative_integral", "derivative", "second_derivative",
]
