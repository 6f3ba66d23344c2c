"""Convexified subproblem: linearize the concave parts around a point ``y``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .quadratic import FactorStack, QuadraticBank


@dataclass(frozen=True)
class ConvexProgram:
    """``min sum w s^2`` (or ``sum w s``) over ``(u, s)`` subject to

    ``||F_j u||^2 + A_j . u - s_l <= c_j``  for the ``2L`` constraints ``j``
    (``j = l`` upper side, ``j = L + l`` lower side) and ``s >= 0``.
    """

    stack: FactorStack
    lin: np.ndarray  # (2L, n)
    const: np.ndarray  # (2L,)
    weights: np.ndarray  # (L,)
    penalty: str
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.stack.n

    @property
    def n_meas(self) -> int:
        return self.stack.n_meas

    def quadratic_parts(self, u: np.ndarray, backend=None):
        st = self.stack
        return kernels.quad_eval(st.indptr, st.indices, st.data, st.owner, u, 2 * st.n_meas, 2.0, backend)

    def constraint_values(self, u: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Left minus right side of the ``2L`` convexified constraints (feasible iff <= 0)."""
        q, _ = self.quadratic_parts(u)
        return q + self.lin @ u - np.concatenate([s, s]) - self.const

    def min_slacks(self, u: np.ndarray) -> np.ndarray:
        """Smallest feasible ``s`` for a given ``u``."""
        L = self.n_meas
        g = self.constraint_values(u, np.zeros(L))
        return np.maximum(np.maximum(g[:L], g[L:]), 0.0)

    def objective(self, s: np.ndarray) -> float:
        if self.penalty == "l1":
            return float(self.weights @ s)
        return float(self.weights @ (s * s))

    def to_socp(self):
        """Encode as a standard-form conic program over ``x = (u, s, tau)``.

        Returns ``(c, G, h, dims)`` for ``min c.x  s.t.  h - G x in K`` with
        ``K`` the nonnegative orthant (``dims['l']``) times second-order cones
        (``dims['q']``).  Each quadratic constraint ``||F u||^2 <= t`` becomes
        the cone ``||(t - 1, 2 F u)|| <= t + 1`` after dividing the constraint
        by a positive factor that brings its data to unit size.  ``tau`` is the epigraph of the
        L2 penalty and is fixed at zero for L1.
        """
        n, L = self.n, self.n_meas
        nx = n + L + 1
        f = self.stack.csr().toarray()
        rows_of = [np.flatnonzero(self.stack.owner == j) for j in range(2 * L)]
        blocks_g, blocks_h, qdims = [], [], []
        # s >= 0 (and tau >= 0)
        g_lin = np.zeros((L + 1, nx))
        g_lin[:L, n : n + L] = -np.eye(L)
        g_lin[L, -1] = -1.0
        h_lin = np.zeros(L + 1)
        for j in range(2 * L):
            l = j % L
            fj = f[rows_of[j]]
            # divide the constraint by k so that its data are O(1)
            k = max(1.0, abs(self.const[j]), float(np.max(np.abs(self.lin[j]), initial=0.0)),
                    float(np.max(fj * fj, initial=0.0)))
            top = np.zeros((2, nx))
            top[:, :n] = self.lin[j] / k
            top[:, n + l] = -1.0 / k
            gj = np.vstack([top, np.hstack([-2.0 * fj / np.sqrt(k), np.zeros((fj.shape[0], L + 1))])])
            cj = self.const[j] / k
            hj = np.concatenate([[1.0 + cj, cj - 1.0], np.zeros(fj.shape[0])])
            blocks_g.append(gj)
            blocks_h.append(hj)
            qdims.append(gj.shape[0])
        c = np.zeros(nx)
        if self.penalty == "l1":
            c[n : n + L] = self.weights
        else:
            c[-1] = 1.0
            gt = np.zeros((L + 2, nx))
            gt[0, -1] = -1.0
            gt[1, -1] = -1.0
            gt[2:, n : n + L] = -2.0 * np.diag(np.sqrt(self.weights))
            ht = np.zeros(L + 2)
            ht[0], ht[1] = 1.0, -1.0
            blocks_g.append(gt)
            blocks_h.append(ht)
            qdims.append(L + 2)
        G = np.vstack([g_lin] + blocks_g)
        # rows are O(1) after scaling; roundoff-level entries only hurt the solver
        G[np.abs(G) < 1e-12] = 0.0
        h = np.concatenate([h_lin] + blocks_h)
        return c, G, h, {"l": L + 1, "q": qdims, "s": []}


def build_subproblem(
    y: np.ndarray, bank: QuadraticBank, z: np.ndarray, weights: np.ndarray, penalty: str = "l2"
) -> ConvexProgram:
    """Inner convex restriction of the two-sided QCQP at the point ``y`` (real, length 2N).

    Upper side: ``u'H+u + 2y'H-u <= z + y'H-y + s``;
    lower side: ``-u'H-u - 2y'H+u <= -z - y'H+y + s``.
    """
    if penalty not in ("l2", "l1"):
        raise ValueError(f"unknown penalty {penalty!r}")
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("linearization point must be finite")
    st = bank.stack
    L = st.n_meas
    # q_swap[l] = y'H+y on lower rows and -y'H-y on upper rows, by ownership swap
    q_swap, g_swap = kernels.quad_eval(st.indptr, st.indices, st.data, st.swap, y, 2 * L, 2.0)
    z = np.asarray(z, dtype=float)
    const = np.concatenate([z, -z]) - q_swap
    return ConvexProgram(st, -g_swap, const, np.asarray(weights, dtype=float), penalty, y)
