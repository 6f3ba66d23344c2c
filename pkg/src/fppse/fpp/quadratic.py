"""Real-domain expansion of Hermitian forms and their convex/concave split."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

SPLIT_RTOL = 1e-9
FACTOR_DROP_RTOL = 1e-14


def realify(h) -> np.ndarray:
    """Map complex Hermitian ``h`` (N x N) to ``[[Re h, -Im h], [Im h, Re h]]``.

    With ``u = [Re v; Im v]`` this gives ``u^T realify(h) u == v^H h v``.
    """
    h = h.toarray() if sp.issparse(h) else np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if h.size and np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def psd_split(hbar: np.ndarray, tol: float | None = None):
    """Split symmetric ``hbar`` into PSD and NSD parts with square-root factors.

    Returns ``(hplus, hminus, rplus, rminus)`` where ``hplus = rplus.T @ rplus``
    and ``-hminus = rminus.T @ rminus``.  Eigenvalues with magnitude at most
    ``tol`` (default ``1e-9 * max|eig|``) are dropped from both parts.
    """
    hbar = np.asarray(hbar, dtype=float)
    if np.max(np.abs(hbar - hbar.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(hbar), initial=0.0)):
        raise ValueError("matrix is not symmetric")
    lam, vec = np.linalg.eigh(0.5 * (hbar + hbar.T))
    if tol is None:
        tol = SPLIT_RTOL * np.max(np.abs(lam), initial=0.0)
    pos, neg = lam > tol, lam < -tol
    rplus = np.sqrt(lam[pos])[:, None] * vec[:, pos].T
    rminus = np.sqrt(-lam[neg])[:, None] * vec[:, neg].T
    return rplus.T @ rplus, -(rminus.T @ rminus), rplus, rminus


@dataclass(frozen=True)
class RealQuadratic:
    """One measurement's real quadratic form, stored on its support.

    ``support`` lists the coordinates of ``u`` (length ``n``) the form touches;
    the dense full-size matrices are materialized on demand.
    """

    n: int
    support: np.ndarray
    local: np.ndarray
    plus_local: np.ndarray
    minus_local: np.ndarray

    def _embed_rows(self, rows: np.ndarray) -> np.ndarray:
        out = np.zeros((rows.shape[0], self.n))
        out[:, self.support] = rows
        return out

    @property
    def hbar(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[np.ix_(self.support, self.support)] = self.local
        return out

    @property
    def rplus(self) -> np.ndarray:
        return self._embed_rows(self.plus_local)

    @property
    def rminus(self) -> np.ndarray:
        return self._embed_rows(self.minus_local)

    @property
    def hplus(self) -> np.ndarray:
        r = self.rplus
        return r.T @ r

    @property
    def hminus(self) -> np.ndarray:
        r = self.rminus
        return -(r.T @ r)

    def value(self, u: np.ndarray) -> float:
        us = u[self.support]
        return float(us @ self.local @ us)


def real_quadratic(h: sp.spmatrix) -> RealQuadratic:
    """Expand and split one Hermitian measurement matrix using only its support."""
    h = sp.csr_matrix(h)
    nb = h.shape[0]
    coo = h.tocoo()
    buses = np.unique(np.concatenate([coo.row, coo.col])) if coo.nnz else np.zeros(0, dtype=int)
    local = realify(h[buses][:, buses]) if buses.size else np.zeros((0, 0))
    support = np.concatenate([buses, buses + nb]).astype(np.int64)
    if support.size:
        _, _, rplus, rminus = psd_split(local)
    else:
        rplus = rminus = np.zeros((0, 0))
    return RealQuadratic(2 * nb, support, local, rplus, rminus)


@dataclass(frozen=True)
class FactorStack:
    """CSR stack of all factor rows of a measurement set.

    For measurement ``l`` (of ``L``) the plus-factor rows belong to constraint
    ``l`` (the upper, ``<= z + s`` side) and the minus-factor rows to
    constraint ``L + l`` (the lower side).  ``swap`` assigns each row to the
    opposite side, which is where its linearization enters.
    """

    n: int
    n_meas: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    owner: np.ndarray
    swap: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n_rows, self.n))


@dataclass(frozen=True)
class QuadraticBank:
    quadratics: tuple[RealQuadratic, ...]
    stack: FactorStack


def build_bank(matrices: Sequence) -> QuadraticBank:
    mats = [getattr(m, "h", m) for m in matrices]
    quads = tuple(real_quadratic(h) for h in mats)
    L = len(quads)
    n = quads[0].n if quads else 0
    indptr = [0]
    indices: list[np.ndarray] = []
    data: list[np.ndarray] = []
    owner: list[int] = []
    swap: list[int] = []
    for side, attr in ((0, "plus_local"), (1, "minus_local")):
        for l, q in enumerate(quads):
            rows = getattr(q, attr)
            for row in rows:
                # eigenvector entries at roundoff level carry no information
                # and upset the conic reference solver
                keep = np.abs(row) > FACTOR_DROP_RTOL * np.max(np.abs(row), initial=0.0)
                indices.append(q.support[keep])
                data.append(row[keep])
                indptr.append(indptr[-1] + int(keep.sum()))
                owner.append(side * L + l)
                swap.append((1 - side) * L + l)
    stack = FactorStack(
        n=n,
        n_meas=L,
        indptr=np.asarray(indptr, dtype=np.int32),
        indices=np.concatenate(indices).astype(np.int32) if indices else np.zeros(0, np.int32),
        data=np.concatenate(data).astype(np.float64) if data else np.zeros(0),
        owner=np.asarray(owner, dtype=np.int64),
        swap=np.asarray(swap, dtype=np.int64),
    )
    return QuadraticBank(quads, stack)


_CACHE: "OrderedDict[int, tuple[object, QuadraticBank]]" = OrderedDict()
_CACHE_SIZE = 16


def quadratic_bank(mset) -> QuadraticBank:
    """Bank for ``mset.matrices``; cached so Monte-Carlo trials sharing matrices split once."""
    key = id(mset.matrices)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is mset.matrices:
        _CACHE.move_to_end(key)
        return hit[1]
    bank = build_bank(mset.matrices)
    _CACHE[key] = (mset.matrices, bank)
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return bank
