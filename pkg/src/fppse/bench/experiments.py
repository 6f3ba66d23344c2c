"""Monte-Carlo drivers for the success-rate, MSE and per-bus experiments.

Every trial draws its ground truth and noise from ``trial_rng(seed, tag,
...)`` so results do not depend on execution order.  With ``workers > 1``
trials run in a process pool and are gathered by index before aggregation.
"""
from __future__ import annotations

import functools
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

import numpy as np

from ..caseio import ExperimentConfig, parse_case, resolve_case
from ..crlb import crlb_bound, fisher_information, wls_gradient
from ..fpp import FppConfig, FppFailure, FppStatus, align_phase, fpp_solve, to_complex
from ..gn import GnConfig, GnStatus, gn_solve
from ..measurement import (
    MeasurementSet,
    add_awgn,
    build_set,
    classical_pf_items,
    random_state,
    sigma_for,
    trial_rng,
    type_prefix_items,
)
from ..network import MeasurementKind, Network
from .metrics import SUCCESS_THRESHOLD, TrialOutcome, angle_error, relative_violation, squared_error

# experiment tags keep the random streams of different experiments apart
_TAG_SUCCESS, _TAG_MSE, _TAG_PERBUS, _TAG_SE = 1, 2, 3, 4


class SolverError(RuntimeError):
    """A single requested solve failed and no estimate could be produced."""


@functools.lru_cache(maxsize=16)
def load_network(case: str) -> Network:
    return parse_case(resolve_case(case))


def case_label(case: str) -> str:
    return resolve_case(case).stem


@functools.lru_cache(maxsize=64)
def template_set(case: str, selector: Any) -> MeasurementSet:
    """Measurement set for ``selector`` with placeholder values.

    Trials derive their sets from this template with :meth:`MeasurementSet.with_z`,
    so the matrices (and their cached eigen-splits) are shared.
    """
    net = load_network(case)
    return build_set(net, selector_items(net, selector), np.ones(net.n_buses, dtype=complex))


def selector_items(net: Network, selector: Any) -> list:
    if selector == "classical-pf":
        return classical_pf_items(net)
    if isinstance(selector, str) and selector.startswith("type-prefix:"):
        return type_prefix_items(net, int(selector.split(":", 1)[1]))
    return [(MeasurementKind(kind), _internal_location(net, loc)) for kind, loc in selector]


def _internal_location(net: Network, loc):
    ids = {b.label: b.id for b in net.buses}
    try:
        if isinstance(loc, tuple):
            return (ids[loc[0]], ids[loc[1]])
        return ids[loc]
    except KeyError as exc:
        raise ValueError(f"bus {exc.args[0]} is not in case {net.name}") from None


def noiseless_set(case: str, selector: Any, v: np.ndarray) -> MeasurementSet:
    tpl = template_set(case, selector)
    return tpl.with_z(tpl.predict(v))


def fpp_config(config: ExperimentConfig) -> FppConfig:
    s = config.fpp
    return FppConfig(
        max_iter=s.max_iter, obj_tol=s.obj_tol, eps=s.eps, penalty=config.penalty, subproblem_tol=s.subproblem_tol
    )


def gn_config(config: ExperimentConfig) -> GnConfig:
    s = config.gn
    return GnConfig(max_iter=s.max_iter, step_tol=s.step_tol, cond_limit=s.cond_limit)


def solve(solver: str, mset: MeasurementSet, config: ExperimentConfig) -> tuple[np.ndarray, int, str, bool, tuple]:
    """Run one solver; returns ``(estimate, iterations, status, converged, history)``.

    ``history`` is the FPP objective history (empty for Gauss-Newton).  An
    FPP subproblem failure yields the last accepted iterate.
    """
    if solver == "fpp":
        try:
            v, st = fpp_solve(mset, fpp_config(config))
        except FppFailure as exc:
            st = exc.state
            v = align_phase(to_complex(st.u_k), mset.slack)
        converged = st.status is FppStatus.CONVERGED
        return v, st.iterations, st.status.value, converged, tuple(st.objective_history)
    if solver == "gn":
        v, res = gn_solve(mset, gn_config(config))
        return v, res.iterations, res.status.value, res.status is GnStatus.CONVERGED, ()
    raise ValueError(f"unknown solver {solver!r}")


def run_trial(index: int, solver: str, mset: MeasurementSet, truth: np.ndarray, config: ExperimentConfig) -> TrialOutcome:
    t0 = time.perf_counter()
    v, iters, status, converged, history = solve(solver, mset, config)
    wall = time.perf_counter() - t0
    finite = bool(np.all(np.isfinite(v)))
    viol = relative_violation(v, mset) if finite else np.inf
    err = squared_error(v, truth) if finite else np.inf
    grad = float(np.linalg.norm(wls_gradient(v, mset)[1])) if finite else np.inf
    return TrialOutcome(index, solver, v, viol, viol < SUCCESS_THRESHOLD, err, iters, wall, status,
                        converged, grad, history)


def _pool_map(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _json_float(x: float) -> float | None:
    # strict JSON has no infinities; a diverged solve is logged as null
    return float(x) if np.isfinite(x) else None


def _summary(outcome: TrialOutcome, **labels) -> dict:
    return dict(labels, trial=outcome.trial_index, solver=outcome.solver, status=outcome.status,
                iterations=outcome.iterations, wall_time=outcome.wall_time,
                relative_violation=_json_float(outcome.relative_violation),
                gradient_norm=_json_float(outcome.gradient_norm),
                objective_history=list(outcome.objective_history))


# --------------------------------------------------------------------------
# power-flow success rates


def _success_task(task) -> list[TrialOutcome]:
    config, ci, ti, t = task
    case, theta = config.case_path[ci], config.theta_max[ti]
    net = load_network(case)
    rng = trial_rng(config.seed, _TAG_SUCCESS, ci, ti, t)
    truth = random_state(net, theta, config.vmag_range, rng)
    mset = noiseless_set(case, "classical-pf", truth.v)
    return [run_trial(t, s, mset, truth.v, config) for s in config.solvers]


def run_success_table(config: ExperimentConfig, log: list | None = None) -> list[dict]:
    """Success rate of each solver on noiseless classical power-flow specifications.

    One row per ``(case, theta, solver)``.  Solver failures count as
    non-successes.
    """
    if config.measurement_selector != "classical-pf":
        raise ValueError("the success-rate experiment needs the classical-pf selector")
    tasks = [
        (config, ci, ti, t)
        for ci in range(len(config.case_path))
        for ti in range(len(config.theta_max))
        for t in range(config.trials)
    ]
    grouped: dict[tuple[int, int], list] = {}
    for (_, ci, ti, _), res in zip(tasks, _pool_map(_success_task, tasks, config.workers)):
        grouped.setdefault((ci, ti), []).append(res)
    rows = []
    for ci, case in enumerate(config.case_path):
        for ti, theta in enumerate(config.theta_max):
            block = grouped[(ci, ti)]
            for si, solver in enumerate(config.solvers):
                outs = [trial[si] for trial in block]
                wins = sum(o.success for o in outs)
                rows.append(
                    {"case": case_label(case), "theta": theta, "solver": solver,
                     "trials": len(outs), "successes": wins, "rate": wins / len(outs)}
                )
                if log is not None:
                    log.extend(_summary(o, case=case_label(case), theta=theta) for o in outs)
    return rows


# --------------------------------------------------------------------------
# MSE versus number of measurement types


def _noisy_trial(config: ExperimentConfig, selector, tag: int, key: tuple, t: int):
    case = config.case
    net = load_network(case)
    rng = trial_rng(config.seed, tag, *key, t)
    truth = random_state(net, config.theta, config.vmag_range, rng)
    mset = add_awgn(noiseless_set(case, selector, truth.v), config.noise_sigmas, rng)
    return truth, mset


def mse_truth(config: ExperimentConfig):
    """The single ground truth shared by every trial and type count of the MSE experiment."""
    net = load_network(config.case)
    return random_state(net, config.theta, config.vmag_range, trial_rng(config.seed, _TAG_MSE))


def _mse_task(task):
    config, truth, k, t = task
    rng = trial_rng(config.seed, _TAG_MSE, k, t)
    mset = add_awgn(noiseless_set(config.case, f"type-prefix:{k}", truth.v), config.noise_sigmas, rng)
    return [run_trial(t, s, mset, truth.v, config) for s in config.solvers]


def run_mse_vs_types(config: ExperimentConfig, log: list | None = None) -> list[dict]:
    """MSE of each solver and the CRLB trace for every type count in ``config.type_counts``.

    One ground truth (see :func:`mse_truth`) is estimated from ``trials``
    independent noise draws per type count, so the MSE of an unbiased
    estimator is bounded below by the CRLB trace at that truth, and adding
    measurement types can only lower the bound.  ``diverged`` counts trials
    whose solver did not report convergence; their last iterates still enter
    the MSE.
    """
    if not config.noise_sigmas or not any(v > 0 for v in config.noise_sigmas.values()):
        raise ValueError("the MSE experiment needs positive noise_sigmas")
    truth = mse_truth(config)
    rows = []
    for k in config.type_counts:
        clean = noiseless_set(config.case, f"type-prefix:{k}", truth.v)
        # the bound depends on the noise level only, not on the noise draw
        sig = np.array([sigma_for(r.kind, config.noise_sigmas) for r in clean.records])
        bound = crlb_bound(fisher_information(truth.v, clean.with_sigma(sig))).trace_bound
        tasks = [(config, truth, k, t) for t in range(config.trials)]
        results = _pool_map(_mse_task, tasks, config.workers)
        for si, solver in enumerate(config.solvers):
            outs = [r[si] for r in results]
            rows.append(
                {"case": case_label(config.case), "types_used": k, "solver": solver,
                 "mse": float(np.mean([o.squared_error for o in outs])), "crlb_trace": bound,
                 "diverged": sum(not o.converged for o in outs)}
            )
            if log is not None:
                log.extend(_summary(o, case=case_label(config.case), types_used=k) for o in outs)
    return rows


# --------------------------------------------------------------------------
# per-bus errors


def _perbus_task(task):
    config, t = task
    truth, mset = _noisy_trial(config, config.measurement_selector, _TAG_PERBUS, (), t)
    outs = []
    for s in config.solvers:
        o = run_trial(t, s, mset, truth.v, config)
        outs.append((o, np.abs(np.abs(o.estimate) - np.abs(truth.v)), angle_error(o.estimate, truth.v)))
    return outs


def run_perbus(config: ExperimentConfig, log: list | None = None) -> list[dict]:
    """Average per-bus magnitude and angle errors of each solver; one row per (bus, solver)."""
    net = load_network(config.case)
    results = _pool_map(_perbus_task, [(config, t) for t in range(config.trials)], config.workers)
    rows = []
    for si, solver in enumerate(config.solvers):
        mag = np.mean([r[si][1] for r in results], axis=0)
        ang = np.mean([r[si][2] for r in results], axis=0)
        for b in net.buses:
            i = b.id - 1
            rows.append({"case": case_label(config.case), "bus": b.label, "solver": solver,
                         "mag_err": float(mag[i]), "ang_err": float(ang[i])})
        if log is not None:
            log.extend(_summary(r[si][0], case=case_label(config.case)) for r in results)
    return rows


# --------------------------------------------------------------------------
# single solves used by the CLI


def single_estimate(config: ExperimentConfig, trial: int = 0):
    """Draw one noisy instance from ``config`` and estimate it with every configured solver."""
    truth, mset = _noisy_trial(config, config.measurement_selector, _TAG_SE, (), trial)
    return truth, mset, [run_trial(trial, s, mset, truth.v, config) for s in config.solvers]
