"""Feasible point pursuit: eigen-split, convexified subproblems, and the outer loop."""
from .ipm import SubproblemFailure, SubproblemResult, solve_subproblem, solve_subproblem_cvxopt
from .quadratic import (
    FactorStack,
    QuadraticBank,
    RealQuadratic,
    build_bank,
    psd_split,
    quadratic_bank,
    real_quadratic,
    realify,
)
from .solver import FppConfig, FppFailure, FppState, FppStatus, align_phase, fpp_solve, to_complex, to_real
from .subproblem import ConvexProgram, build_subproblem

__all__ = [
    "ConvexProgram",
    "FactorStack",
    "FppConfig",
    "FppFailure",
    "FppState",
    "FppStatus",
    "QuadraticBank",
    "RealQuadratic",
    "SubproblemFailure",
    "SubproblemResult",
    "align_phase",
    "build_bank",
    "build_subproblem",
    "fpp_solve",
    "psd_split",
    "quadratic_bank",
    "real_quadratic",
    "realify",
    "solve_subproblem",
    "solve_subproblem_cvxopt",
    "to_complex",
    "to_real",
]
