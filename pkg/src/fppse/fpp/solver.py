"""Outer successive-convex-approximation loop."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..measurement import MeasurementSet
from .ipm import SubproblemFailure, solve_subproblem, solve_subproblem_cvxopt
from .quadratic import QuadraticBank, quadratic_bank
from .subproblem import build_subproblem


class FppStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    SUBPROBLEM_FAILURE = "SubproblemFailure"


@dataclass(frozen=True)
class FppConfig:
    max_iter: int = 100
    obj_tol: float = 1e-5
    eps: float = 1e-6
    penalty: str = "l2"
    init: np.ndarray | None = None
    subproblem_tol: float = 1e-8
    backend: str = "native"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if min(self.obj_tol, self.eps, self.subproblem_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty not in ("l2", "l1"):
            raise ValueError(f"unknown penalty {self.penalty!r}")
        if self.backend not in ("native", "cvxopt"):
            raise ValueError(f"unknown subproblem backend {self.backend!r}")


@dataclass
class FppState:
    """Progress of one solve.

    ``objective_history[0]`` is the penalty at the starting point with the
    smallest feasible slacks; entry ``k`` is the subproblem optimum of
    iteration ``k``.
    """

    u_k: np.ndarray
    s_k: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    iterations: int = 0
    status: FppStatus = FppStatus.MAX_ITER
    stop_reason: str = "max_iter"
    subproblem_iterations: list[int] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_history[-1]


class FppFailure(RuntimeError):
    def __init__(self, message: str, state: FppState):
        super().__init__(message)
        self.state = state


def to_complex(u: np.ndarray) -> np.ndarray:
    n = u.shape[0] // 2
    return u[:n] + 1j * u[n:]


def to_real(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])


def align_phase(v: np.ndarray, ref: int) -> np.ndarray:
    """Rotate ``v`` globally so that bus ``ref`` has angle exactly 0."""
    v = np.asarray(v, dtype=complex)
    a = v[ref]
    if a == 0:
        return v.copy()
    out = v * (np.conj(a) / abs(a))
    out[ref] = abs(a)
    return out


def _initial_slacks(prog) -> np.ndarray:
    return prog.min_slacks(prog.y)


def fpp_solve(
    mset: MeasurementSet,
    config: FppConfig | None = None,
    bank: QuadraticBank | None = None,
) -> tuple[np.ndarray, FppState]:
    """Feasible point pursuit on the slack-penalized QCQP of ``mset``.

    Starts from ``config.init`` or the flat profile and stops on whichever
    fires first: objective improvement below ``obj_tol``, iterate displacement
    at most ``eps``, or ``max_iter`` iterations.  The estimate is rotated so
    the slack bus has angle 0.  Power flow is the unit-weight special case.
    """
    config = config or FppConfig()
    bank = bank if bank is not None else quadratic_bank(mset)
    z, w = mset.z, mset.weights
    nb = mset.n_buses
    if config.init is not None:
        y = to_real(config.init)
    else:
        y = np.concatenate([np.ones(nb), np.zeros(nb)])
    prog = build_subproblem(y, bank, z, w, config.penalty)
    s = _initial_slacks(prog)
    state = FppState(y.copy(), s, [prog.objective(s)])
    for k in range(1, config.max_iter + 1):
        try:
            if config.backend == "cvxopt":
                res = solve_subproblem_cvxopt(prog, tol=config.subproblem_tol)
            else:
                res = solve_subproblem(prog, u0=y, s0=s, tol=config.subproblem_tol)
        except SubproblemFailure as exc:
            state.status = FppStatus.SUBPROBLEM_FAILURE
            state.stop_reason = "subproblem_failure"
            raise FppFailure(f"iteration {k}: {exc}", state) from exc
        u_new, s_new, obj = res.u, res.s, res.objective
        if obj > state.objective_history[-1]:
            # the previous point is feasible for this subproblem; keep it
            u_new, s_new, obj = y, prog.min_slacks(y), prog.objective(prog.min_slacks(y))
            obj = min(obj, state.objective_history[-1])
        disp = float(np.linalg.norm(u_new - y))
        improvement = state.objective_history[-1] - obj
        state.objective_history.append(obj)
        state.subproblem_iterations.append(res.iterations)
        state.iterations = k
        y, s = u_new, s_new
        state.u_k, state.s_k = y.copy(), s.copy()
        if improvement < config.obj_tol:
            state.status, state.stop_reason = FppStatus.CONVERGED, "objective"
            break
        if disp <= config.eps:
            state.status, state.stop_reason = FppStatus.CONVERGED, "displacement"
            break
        prog = build_subproblem(y, bank, z, w, config.penalty)
    v = align_phase(to_complex(y), mset.slack)
    return v, state
