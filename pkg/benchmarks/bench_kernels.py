"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--case case39] [--repeat 200]

Reports per-call times of the two hot kernels on the full measurement set of
a bundled case, plus the wall time of complete power-flow solves with each
backend.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fppse import kernels
from fppse.caseio import parse_case
from fppse.fpp import FppConfig, build_bank, fpp_solve
from fppse.measurement import GroundTruth, classical_pf_spec, random_state, type_prefix_spec


def time_call(fn, repeat: int) -> float:
    """Best-of-five mean seconds per call."""
    return min(timeit.repeat(fn, number=repeat, repeat=5)) / repeat


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--case", default="case39")
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--solves", type=int, default=5)
    args = p.parse_args(argv)

    if "cython" not in kernels.BACKENDS:
        print("compiled kernels are not built; only the fallback is available")
    backends = sorted(kernels.BACKENDS)

    net = parse_case(args.case)
    stack = build_bank(type_prefix_spec(net, GroundTruth(np.ones(net.n_buses, complex)), 7).matrices).stack
    rng = np.random.default_rng(0)
    u = rng.normal(size=stack.n)
    w = rng.uniform(0.1, 2.0, stack.n_rows)
    m = 2 * stack.n_meas
    print(f"{args.case}: {stack.n_meas} measurements, {stack.n_rows} factor rows, n = {stack.n}")

    print(f"{'kernel':<10}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for name, call in (
        ("quad_eval", lambda b: kernels.quad_eval(stack.indptr, stack.indices, stack.data, stack.owner, u, m, 2.0, b)),
        ("gram", lambda b: kernels.gram(stack.indptr, stack.indices, stack.data, w, stack.n, b)),
    ):
        times = {b: time_call(lambda b=b: call(b), args.repeat) for b in backends}
        speed = times["python"] / times["cython"] if "cython" in times else 1.0
        print(f"{name:<10}" + "".join(f"{times[b] * 1e6:>12.1f}us" for b in backends) + f"{speed:>9.1f}x")

    sets = [
        classical_pf_spec(net, random_state(net, 0.3 * np.pi, rng=np.random.default_rng(s)))
        for s in range(args.solves)
    ]
    saved = kernels._impl
    row = []
    try:
        for b in backends:
            kernels._impl = kernels.BACKENDS[b]
            t = timeit.default_timer()
            for mset in sets:
                fpp_solve(mset, FppConfig())
            row.append((b, (timeit.default_timer() - t) / len(sets)))
    finally:
        kernels._impl = saved
    print("power-flow solve, mean wall time: " + ", ".join(f"{b} {t:.3f}s" for b, t in row))


if __name__ == "__main__":
    main()
