"""Primal-dual interior-point solver for the convexified subproblem.

The program is smooth and convex: every constraint is a sum of squares of
factor rows plus a linear term.  Newton steps eliminate the slack block
(diagonal) by a Schur complement, leaving a dense ``2N x 2N`` solve.  The
constraint assembly runs through :mod:`fppse.kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .. import kernels
from .subproblem import ConvexProgram


class SubproblemFailure(RuntimeError):
    """The subproblem solver did not reach the requested accuracy."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SubproblemResult:
    u: np.ndarray
    s: np.ndarray
    objective: float
    iterations: int
    gap: float
    dual_residual: float


TRACE = False
MU = 10.0
ALPHA_SHRINK = 0.5
ARMIJO = 0.01


def _start_slacks(prog: ConvexProgram, u: np.ndarray, s_hint: np.ndarray | None) -> np.ndarray:
    need = prog.min_slacks(u)
    s = need + 0.1 * (1.0 + need)
    if s_hint is not None:
        s = np.maximum(s, np.asarray(s_hint) + 1e-3 * (1.0 + need))
    return s


def _initial_multipliers(f: np.ndarray, g0: np.ndarray, L: int) -> np.ndarray:
    """Multipliers that roughly balance the slack part of the dual residual."""
    inv = 1.0 / (-f)
    total = inv[:L] + inv[L : 2 * L] + inv[2 * L :]
    scale = np.maximum(g0, 0.0) / total
    lam = inv * (1.0 + np.concatenate([scale, scale, scale]))
    return lam


def _max_feasible_step(f: np.ndarray, df: np.ndarray, curv: np.ndarray) -> float:
    """Largest alpha keeping ``f + alpha df + alpha^2 curv < 0`` for every constraint.

    ``curv`` has one entry per quadratic constraint; the trailing linear
    constraints have zero curvature.
    """
    c2 = np.zeros_like(f)
    c2[: curv.shape[0]] = curv
    alpha = np.full(f.shape, np.inf)
    lin = c2 <= 1e-300
    grow = lin & (df > 0)
    alpha[grow] = -f[grow] / df[grow]
    quad = ~lin
    a, b, c = c2[quad], df[quad], f[quad]
    disc = np.sqrt(b * b - 4.0 * a * c)
    # positive root of a x^2 + b x + c = 0 with c < 0, computed stably
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha[quad] = np.where(b > 0, (-2.0 * c) / (b + disc), (-b + disc) / (2.0 * a))
    return float(min(1.0, np.min(alpha)))


def solve_subproblem(
    prog: ConvexProgram,
    u0: np.ndarray | None = None,
    s0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 200,
    backend: str | None = None,
) -> SubproblemResult:
    """Minimize the slack penalty of ``prog``.

    Stops when the dual residual is below ``tol`` relative to the size of its
    terms and the surrogate duality gap is below ``tol * max(1, f0)``.  If the
    step length collapses at the rounding floor, a point within ``100 * tol``
    of both targets is accepted.  Primal iterates are strictly feasible
    throughout.
    """
    st = prog.stack
    n, L = prog.n, prog.n_meas
    m2 = 2 * L
    m = 3 * L
    l1 = prog.penalty == "l1"
    w = prog.weights
    u = np.array(prog.y if u0 is None else u0, dtype=float)
    s = _start_slacks(prog, u, s0)
    A, c = prog.lin, prog.const

    def evaluate(u, s):
        q, gq = kernels.quad_eval(st.indptr, st.indices, st.data, st.owner, u, m2, 2.0, backend)
        fq = q + A @ u - np.concatenate([s, s]) - c
        return np.concatenate([fq, -s]), gq + A

    def grad_f0(s):
        return w.copy() if l1 else 2.0 * w * s

    def residuals(f, gu, lam, s, t):
        lq = lam[:m2]
        r_u = gu.T @ lq
        r_s = grad_f0(s) - lq[:L] - lq[L:] - lam[m2:]
        r_cent = -lam * f - 1.0 / t
        return r_u, r_s, r_cent

    f, gu = evaluate(u, s)
    lam = _initial_multipliers(f, grad_f0(s), L)
    gap = dres = np.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        eta = float(-f @ lam)
        t = MU * m / eta
        r_u, r_s, r_cent = residuals(f, gu, lam, s, t)
        dres = float(max(np.max(np.abs(r_u), initial=0.0), np.max(np.abs(r_s))))
        f0 = prog.objective(s)
        # the dual residual is a difference of terms of size |G|'lam; scale to that
        gscale = max(
            1.0,
            float(np.max(np.abs(grad_f0(s)))),
            float(np.max(np.abs(gu).T @ lam[:m2], initial=0.0)),
        )
        gap = eta
        gtol = tol * max(1.0, f0)
        if dres <= tol * gscale and eta <= gtol:
            break
        if stalled >= 3:
            if dres <= 1e2 * tol * gscale and eta <= 1e2 * gtol:
                break
            raise SubproblemFailure(
                "step length collapsed", {"iteration": it, "gap": eta, "dual_residual": dres}
            )

        d = lam / (-f)
        inv = 1.0 / (t * (-f))
        dq = d[:m2]
        rw = 2.0 * lam[:m2][st.owner]
        h_uu = kernels.gram(st.indptr, st.indices, st.data, rw, n, backend)
        h_uu += (gu.T * dq) @ gu
        h_us = -(gu[:L].T * dq[:L] + gu[L:].T * dq[L:])
        h_ss = d[:L] + d[L:m2] + d[m2:]
        if not l1:
            h_ss = h_ss + 2.0 * w
        rhs_u = -(gu.T @ inv[:m2])
        rhs_s = -grad_f0(s) + inv[:L] + inv[L:m2] + inv[m2:]
        schur = h_uu - (h_us / h_ss) @ h_us.T
        rhs = rhs_u - h_us @ (rhs_s / h_ss)
        try:
            du = sla.cho_solve(sla.cho_factor(schur, check_finite=False), rhs, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            reg = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(schur)))))
            du = np.linalg.lstsq(schur + reg * np.eye(n), rhs, rcond=None)[0]
        ds = (rhs_s - h_us.T @ du) / h_ss
        dfx = np.concatenate([gu @ du - np.concatenate([ds, ds]), -ds])
        dlam = d * dfx - lam + inv
        if not (np.all(np.isfinite(du)) and np.all(np.isfinite(dlam))):
            raise SubproblemFailure("non-finite Newton direction", {"iteration": it, "gap": eta})

        neg = dlam < 0
        alpha = min(1.0, float(np.min(-lam[neg] / dlam[neg]))) if np.any(neg) else 1.0
        alpha *= 0.99
        amax = alpha
        fdu = kernels.quad_eval(st.indptr, st.indices, st.data, st.owner, du, m2, 2.0, backend)[0]
        alpha = min(alpha, 0.99 * _max_feasible_step(f, dfx, fdu))
        amax = alpha
        rnorm = np.sqrt(r_u @ r_u + r_s @ r_s + r_cent @ r_cent)
        for _ in range(60):
            un, sn = u + alpha * du, s + alpha * ds
            fn, gun = evaluate(un, sn)
            if np.all(fn < 0):
                ln = lam + alpha * dlam
                a, b, cc = residuals(fn, gun, ln, sn, t)
                if np.sqrt(a @ a + b @ b + cc @ cc) <= (1.0 - ARMIJO * alpha) * rnorm:
                    break
            alpha *= ALPHA_SHRINK
        else:
            raise SubproblemFailure(
                "line search failed", {"iteration": it, "gap": eta, "dual_residual": dres}
            )

        if TRACE: print(it, f"eta={eta:.3e} dres={dres:.3e} amax={amax:.3e} alpha={alpha:.3e} f0={f0:.6e}")
        stalled = stalled + 1 if alpha < 1e-8 else 0
        u, s, lam, f, gu = un, sn, ln, fn, gun
    else:
        raise SubproblemFailure(
            f"no convergence in {max_iter} iterations", {"gap": gap, "dual_residual": dres}
        )
    s_tight = np.minimum(s, prog.min_slacks(u))
    return SubproblemResult(u, s_tight, prog.objective(s_tight), it, gap, dres)


def solve_subproblem_cvxopt(prog: ConvexProgram, tol: float = 1e-8) -> SubproblemResult:
    """Reference solve through cvxopt's conic interior-point method on the SOCP encoding.

    cvxopt often stalls (or hits a domain error) when asked for ``tol`` on
    these programs; it is then rerun at its default tolerances, which reach
    roughly ``1e-7`` relative accuracy.
    """
    import cvxopt
    from cvxopt import solvers

    c, G, h, dims = prog.to_socp()
    args = (cvxopt.matrix(c), cvxopt.matrix(G), cvxopt.matrix(h), dims)
    attempts = [
        {"abstol": tol * 1e-2, "reltol": tol, "feastol": tol},
        {"abstol": 1e-7, "reltol": 1e-6, "feastol": 1e-7},
    ]
    sol, last = None, "no attempt"
    for opts in attempts:
        try:
            cand = solvers.conelp(*args, options=dict(opts, show_progress=False, maxiters=200))
        except (ValueError, ArithmeticError) as exc:
            last = f"cvxopt error: {exc}"
            continue
        pinf = cand.get("primal infeasibility")
        if cand["status"] == "optimal" or (cand.get("x") is not None and pinf is not None and pinf < 1e-6):
            sol = cand
            break
        last = f"cvxopt status {cand['status']}"
    if sol is None:
        raise SubproblemFailure(last, {"backend": "cvxopt"})
    x = np.array(sol["x"]).ravel()
    u = x[: prog.n]
    s = np.maximum(prog.min_slacks(u), 0.0)
    return SubproblemResult(u, s, prog.objective(s), int(sol["iterations"]), float(sol["gap"] or 0.0), 0.0)
