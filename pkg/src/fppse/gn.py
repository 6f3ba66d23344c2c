"""Gauss-Newton weighted least squares in polar coordinates.

The baseline estimator: flat start, undamped Gauss-Newton steps on the
normal equations, and a divergence flag raised when the linearization becomes
too ill-conditioned.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .measurement import MeasurementSet


class GnStatus(enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class GnConfig:
    """Iteration limits for :func:`gn_solve`.

    ``cond_limit`` bounds the condition number of the linearization; an
    iteration that exceeds it ends the solve as diverged.  With
    ``cond_measure="jacobian"`` (default) the measured matrix is the weighted
    Jacobian ``W^(1/2) J`` in the 2-norm; ``"normal"`` uses the 1-norm
    condition number of ``J^T W J`` instead.

    A solve counts as converged once a step is no longer than ``step_tol``
    and the weighted gradient ``J^T W r`` at the new point has norm at most
    ``grad_tol * (1 + ||r||)``.
    """

    max_iter: int = 50
    step_tol: float = 1e-8
    grad_tol: float = 1e-7
    cond_limit: float = 1e5
    cond_measure: str = "jacobian"
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.step_tol <= 0 or self.grad_tol <= 0:
            raise ValueError("step_tol and grad_tol must be positive")
        if not self.cond_limit > 1:
            raise ValueError("cond_limit must exceed 1")
        if self.cond_measure not in ("jacobian", "normal"):
            raise ValueError(f"unknown condition measure {self.cond_measure!r}")


def linearization_condition(jac: np.ndarray, weights: np.ndarray, measure: str = "jacobian") -> float:
    """Condition number used for divergence detection (``inf`` when rank deficient)."""
    wj = np.sqrt(weights)[:, None] * jac
    if measure == "normal":
        try:
            return float(np.linalg.cond(wj.T @ wj, 1))
        except np.linalg.LinAlgError:
            return np.inf
    sv = np.linalg.svd(wj, compute_uv=False)
    if sv.size < jac.shape[1] or sv[-1] <= 0:
        return np.inf
    return float(sv[0] / sv[-1])


@dataclass
class GnResult:
    v: np.ndarray
    status: GnStatus
    iterations: int
    condition: float
    residual_norm: float


def _state_to_voltage(mag: np.ndarray, ang: np.ndarray) -> np.ndarray:
    return mag * np.exp(1j * ang)


def _free_angles(n: int, slack: int) -> np.ndarray:
    return np.delete(np.arange(n), slack)


def residual_jacobian(v: np.ndarray, mset: MeasurementSet) -> tuple[np.ndarray, np.ndarray]:
    """Residuals ``z - v^H H v`` and the Jacobian of ``v^H H v`` in polar coordinates.

    Columns ``0..N-1`` are derivatives with respect to the magnitudes; the
    remaining ``N-1`` columns are derivatives with respect to the angles of
    every bus except the slack.

    Examples
    --------
    A ``Vmag2`` row has ``2 |V_n|`` in column ``n`` and zeros elsewhere.
    """
    v = np.asarray(v, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("state must be finite")
    n = mset.n_buses
    hv = (mset.stacked() @ v).reshape(len(mset), n)
    pre = np.conj(hv) * v  # conj((H v)_n) v_n, one row per measurement
    h = pre.sum(axis=1).real
    mag = np.abs(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), 1.0)
    # d/d|V_n| uses dv_n = exp(j theta_n); stays defined at |V_n| = 0
    j_mag = 2.0 * np.real(np.conj(hv) * unit)
    j_ang = -2.0 * np.imag(pre)
    jac = np.hstack([j_mag, j_ang[:, _free_angles(n, mset.slack)]])
    return mset.z - h, jac


def gn_solve(mset: MeasurementSet, config: GnConfig | None = None) -> tuple[np.ndarray, GnResult]:
    """Plain Gauss-Newton WLS from the flat profile (or ``config.init``).

    Returns the last iterate and a :class:`GnResult`.  The status is
    ``Diverged`` when the normal matrix is singular, the linearization's
    condition number exceeds ``cond_limit``, or the iterate becomes
    non-finite.
    """
    config = config or GnConfig()
    n, slack = mset.n_buses, mset.slack
    free = _free_angles(n, slack)
    if config.init is not None:
        v0 = np.asarray(config.init, dtype=complex)
        mag, ang = np.abs(v0), np.angle(v0) - np.angle(v0[slack])
        ang[slack] = 0.0
    else:
        mag, ang = np.ones(n), np.zeros(n)
    w = mset.weights
    cond = 1.0
    status = GnStatus.MAX_ITER
    it = 0
    r = mset.z.copy()
    for it in range(1, config.max_iter + 1):
        r, jac = residual_jacobian(_state_to_voltage(mag, ang), mset)
        normal = jac.T @ (w[:, None] * jac)
        rhs = jac.T @ (w * r)
        cond = linearization_condition(jac, w, config.cond_measure)
        if not np.isfinite(cond) or cond > config.cond_limit:
            status = GnStatus.DIVERGED
            break
        try:
            dx = sla.solve(normal, rhs, assume_a="pos", check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            status = GnStatus.DIVERGED
            break
        mag = mag + dx[:n]
        ang = ang.copy()
        ang[free] += dx[n:]
        if not (np.all(np.isfinite(mag)) and np.all(np.isfinite(ang))):
            status = GnStatus.DIVERGED
            break
        if np.linalg.norm(dx) <= config.step_tol:
            r, jac = residual_jacobian(_state_to_voltage(mag, ang), mset)
            # a short step alone is not enough when heavy weights amplify the remaining gradient
            if np.linalg.norm(jac.T @ (w * r)) <= config.grad_tol * (1.0 + np.linalg.norm(r)):
                status = GnStatus.CONVERGED
                break
    v = _state_to_voltage(mag, ang)
    v[slack] = mag[slack]
    return v, GnResult(v, status, it, cond, float(np.linalg.norm(r)) if np.all(np.isfinite(r)) else np.inf)
