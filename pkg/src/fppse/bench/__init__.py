"""Monte-Carlo experiments, metrics and result emission."""
from .experiments import (
    SolverError,
    run_mse_vs_types,
    run_perbus,
    run_success_table,
    run_trial,
    single_estimate,
    solve,
)
from .metrics import SUCCESS_THRESHOLD, TrialOutcome, angle_error, mse, relative_violation, squared_error

__all__ = [
    "SUCCESS_THRESHOLD",
    "SolverError",
    "TrialOutcome",
    "angle_error",
    "mse",
    "relative_violation",
    "run_mse_vs_types",
    "run_perbus",
    "run_success_table",
    "run_trial",
    "single_estimate",
    "solve",
    "squared_error",
]
