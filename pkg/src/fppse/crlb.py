"""Fisher information, Cramér-Rao bound and Wirtinger gradients.

Everything here works in conjugate coordinates ``(v, conj(v))``.  For
Gaussian noise the negative log-likelihood is, up to a constant,

    f(v) = sum_l (z_l - v^H H_l v)^2 / (2 sigma_l^2)

and ``v`` is identifiable only up to a global phase, so the Fisher
information is singular and the bound uses its pseudo-inverse.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementSet

#: Relative eigenvalue cutoff of the pseudo-inverse.
RANK_RTOL = 1e-10


def _sigmas(mset: MeasurementSet) -> np.ndarray:
    sig = mset.sigma
    if np.any(sig <= 0):
        raise ValueError("every measurement needs a positive noise standard deviation")
    return sig


def _hv(v: np.ndarray, mset: MeasurementSet) -> np.ndarray:
    return (mset.stacked() @ v).reshape(len(mset), mset.n_buses)


def _gradient(v: np.ndarray, mset: MeasurementSet, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=complex)
    hv = _hv(v, mset)
    phi = mset.z - np.real(hv @ np.conj(v))
    d_vbar = -(w * phi) @ hv
    return np.conj(d_vbar), d_vbar


def wirtinger_gradient(v: np.ndarray, mset: MeasurementSet) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives ``(df/dv, df/dv̄)`` of the negative log-likelihood.

    With ``phi_l = z_l - v^H H_l v``, ``df/dv̄ = -sum_l phi_l H_l v / sigma_l^2``
    and ``df/dv`` is its conjugate.  The real gradient with respect to
    ``u = [Re v; Im v]`` is ``2 [Re; Im](df/dv̄)``.

    Raises
    ------
    ValueError
        If any record has ``sigma == 0``.
    """
    return _gradient(v, mset, 1.0 / _sigmas(mset) ** 2)


def wls_gradient(v: np.ndarray, mset: MeasurementSet) -> tuple[np.ndarray, np.ndarray]:
    """Same derivatives for ``sum_l w_l phi_l^2 / 2`` using the set's stored weights.

    Defined for noiseless sets too, which makes it the stationarity measure
    for solver output.
    """
    return _gradient(v, mset, mset.weights)


def real_gradient(d_vbar: np.ndarray) -> np.ndarray:
    """Gradient with respect to ``u = [Re v; Im v]`` from ``df/dv̄``."""
    return 2.0 * np.concatenate([d_vbar.real, d_vbar.imag])


def negative_log_likelihood(v: np.ndarray, mset: MeasurementSet) -> float:
    phi = mset.z - mset.predict(v)
    return float(np.sum(phi**2 / (2.0 * _sigmas(mset) ** 2)))


@dataclass(frozen=True)
class FisherInformation:
    """Conjugate-coordinate Fisher information ``f = G G^H``.

    ``g_columns`` is ``2N x L``; column ``l`` is ``[H_l v; conj(H_l v)] / sigma_l``.
    """

    f: np.ndarray
    g_columns: np.ndarray
    v: np.ndarray

    @property
    def n_buses(self) -> int:
        return self.v.shape[0]

    def null_vector(self) -> np.ndarray:
        """``[v; -conj(v)]``, the global-phase direction annihilated by ``f``."""
        return np.concatenate([self.v, -np.conj(self.v)])


def fisher_information(v: np.ndarray, mset: MeasurementSet) -> FisherInformation:
    """Fisher information of ``v`` under independent Gaussian measurement noise."""
    v = np.asarray(v, dtype=complex)
    sig = _sigmas(mset)
    hv = _hv(v, mset) / sig[:, None]
    g = np.vstack([hv.T, np.conj(hv).T])
    f = g @ g.conj().T
    return FisherInformation(0.5 * (f + f.conj().T), g, v)


@dataclass(frozen=True)
class CrlbResult:
    bound_block: np.ndarray
    trace_bound: float
    numerical_rank: int


def crlb_bound(fi: FisherInformation | np.ndarray) -> CrlbResult:
    """Pseudo-inverse bound on ``E ||v_hat - v||^2``.

    Eigenvalues below ``RANK_RTOL * lambda_max`` are treated as zero.  The
    bound is the real trace of the top-left ``N x N`` block of ``f^+``.

    Examples
    --------
    >>> import numpy as np
    >>> r = crlb_bound(np.array([[1, 1], [1, 1]], dtype=complex))
    >>> round(r.trace_bound, 12), r.numerical_rank
    (0.25, 1)
    """
    f = fi.f if isinstance(fi, FisherInformation) else np.asarray(fi, dtype=complex)
    n = f.shape[0] // 2
    lam, vec = np.linalg.eigh(0.5 * (f + f.conj().T))
    top = float(np.max(lam, initial=0.0))
    keep = lam > RANK_RTOL * top if top > 0 else np.zeros_like(lam, dtype=bool)
    vk = vec[:, keep]
    pinv = (vk / lam[keep]) @ vk.conj().T
    block = pinv[:n, :n]
    return CrlbResult(block, max(0.0, float(np.trace(block).real)), int(keep.sum()))
