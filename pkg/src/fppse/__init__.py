"""Feasible point pursuit solvers for AC power flow and power system state estimation."""
from .kernels import BACKEND as KERNEL_BACKEND
from .network import (
    AdmittanceMatrix,
    Branch,
    Bus,
    BusKind,
    HermitianMeasurementMatrix,
    MeasurementKind,
    Network,
    build_admittance,
    evaluate,
    measurement_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "AdmittanceMatrix",
    "Branch",
    "Bus",
    "BusKind",
    "HermitianMeasurementMatrix",
    "MeasurementKind",
    "Network",
    "build_admittance",
    "evaluate",
    "measurement_matrix",
]
