"""Per-trial outcome record and the scalar metrics of the experiments."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..measurement import MeasurementSet

#: Relative violation below which a power-flow solve counts as a success.
SUCCESS_THRESHOLD = 1e-3


def relative_violation(estimate: np.ndarray, mset: MeasurementSet) -> float:
    """``sum (z - v^H H v)^2 / sum z^2`` over the records of ``mset``.

    Raises
    ------
    ValueError
        If every ``z`` is zero, where the ratio is undefined.
    """
    z = mset.z
    denom = float(z @ z)
    if denom == 0.0:
        raise ValueError("relative violation is undefined for an all-zero measurement vector")
    r = z - mset.predict(estimate)
    return float(r @ r) / denom


def squared_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    d = np.asarray(estimate, dtype=complex) - np.asarray(truth, dtype=complex)
    return float(np.vdot(d, d).real)


def mse(estimates: Sequence[np.ndarray], truths: Sequence[np.ndarray]) -> float:
    """Mean of ``||v_hat_i - v_i||^2`` over trials; both sides must already share a phase reference."""
    if len(estimates) != len(truths):
        raise ValueError(f"{len(estimates)} estimates but {len(truths)} truths")
    if not len(estimates):
        raise ValueError("need at least one trial")
    return float(np.mean([squared_error(e, t) for e, t in zip(estimates, truths)]))


def angle_error(estimate: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Absolute per-bus angle difference, wrapped to ``[0, pi]``."""
    d = np.angle(np.asarray(estimate) * np.conj(truth))
    return np.abs(d)


@dataclass(frozen=True)
class TrialOutcome:
    trial_index: int
    solver: str
    estimate: np.ndarray
    relative_violation: float
    success: bool
    squared_error: float
    iterations: int
    wall_time: float
    status: str = ""
    converged: bool = False
    gradient_norm: float = float("nan")
    objective_history: tuple[float, ...] = ()
