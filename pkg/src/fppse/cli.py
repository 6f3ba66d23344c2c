"""Command-line interface.

Exit codes: 0 on completion, 2 on a configuration or input error, 3 when a
requested solve fails irrecoverably.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import experiments as ex
from .caseio import CaseParseError, ConfigError, load_config, write_results_csv
from .crlb import crlb_bound, fisher_information
from .fpp import FppFailure, fpp_solve
from .gn import gn_solve
from .measurement import random_state, trial_rng

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

_BENCH = {
    "tables": (ex.run_success_table, "success.csv"),
    "mse-vs-types": (ex.run_mse_vs_types, "mse.csv"),
    "perbus": (ex.run_perbus, "perbus.csv"),
}


def _angle(text: str) -> float:
    """Parse radians, accepting a ``pi`` suffix such as ``0.1pi``."""
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*\*?\s*pi\s*", text)
    try:
        value = float(m.group(1)) * math.pi if m else float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid angle {text!r}") from None
    if not 0 <= value <= math.pi:
        raise argparse.ArgumentTypeError("angle must lie in [0, pi]")
    return value


def _print_state(v: np.ndarray, labels) -> None:
    print(f"{'bus':>6} {'|V|':>10} {'angle(deg)':>12}")
    for b, x in zip(labels, v):
        print(f"{b:>6} {abs(x):>10.6f} {np.degrees(np.angle(x)):>12.6f}")


def cmd_pf(args) -> int:
    net = ex.load_network(args.case)
    truth = random_state(net, args.theta, rng=trial_rng(args.seed, 0))
    mset = ex.noiseless_set(args.case, "classical-pf", truth.v)
    if args.solver == "fpp":
        try:
            v, st = fpp_solve(mset)
        except FppFailure as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        status, iters = st.status.value, st.iterations
    else:
        v, res = gn_solve(mset)
        status, iters = res.status.value, res.iterations
    if not np.all(np.isfinite(v)):
        print(f"error: {args.solver} produced a non-finite estimate ({status})", file=sys.stderr)
        return EXIT_SOLVER
    viol = ex.relative_violation(v, mset)
    print(f"case {net.name}: solver={args.solver} status={status} iterations={iters} "
          f"relative_violation={viol:.3e} success={viol < ex.SUCCESS_THRESHOLD}")
    _print_state(v, net.external_ids())
    return EXIT_OK


def cmd_se(args) -> int:
    config = load_config(args.config)
    truth, mset, outcomes = ex.single_estimate(config, args.trial)
    net = ex.load_network(config.case)
    for o in outcomes:
        print(f"{o.solver}: status={o.status} iterations={o.iterations} "
              f"relative_violation={o.relative_violation:.3e} squared_error={o.squared_error:.6e}")
    if all(not np.all(np.isfinite(o.estimate)) for o in outcomes):
        return EXIT_SOLVER
    for o in outcomes:
        print(f"\n{o.solver} estimate")
        _print_state(o.estimate, net.external_ids())
    return EXIT_OK


def cmd_crlb(args) -> int:
    config = load_config(args.config)
    truth, mset, _ = ex.single_estimate(replace(config, solvers=()), args.trial)
    try:
        res = crlb_bound(fisher_information(truth.v, mset))
    except ValueError as exc:
        raise ConfigError("/noise_sigmas", str(exc)) from exc
    print(json.dumps({"case": ex.case_label(config.case), "measurements": len(mset),
                      "n_buses": mset.n_buses, "trace_bound": res.trace_bound,
                      "numerical_rank": res.numerical_rank}, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    config = load_config(args.config)
    run, filename = _BENCH[args.experiment]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log: list = []
    rows = run(config, log)
    write_results_csv(out / filename, rows)
    timing = out / (Path(filename).stem + "_timing.json")
    timing.write_text(json.dumps(log, indent=1) + "\n")
    print(f"wrote {out / filename} ({len(rows)} rows); per-trial wall times in {timing}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fppse", description="Feasible point pursuit power flow and state estimation.")
    sub = p.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("pf", help="solve one random classical power-flow instance")
    pf.add_argument("case", help="bundled case name (e.g. case14) or path to a MATPOWER .m file")
    pf.add_argument("--theta", type=_angle, default=0.1 * math.pi, help="angle range in radians, or e.g. 0.3pi")
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--solver", choices=("fpp", "gn"), default="fpp")
    pf.set_defaults(func=cmd_pf)

    se = sub.add_parser("se", help="estimate one noisy instance described by a config file")
    se.add_argument("config")
    se.add_argument("--trial", type=int, default=0)
    se.set_defaults(func=cmd_se)

    cr = sub.add_parser("crlb", help="Cramér-Rao bound for one instance of a config file")
    cr.add_argument("config")
    cr.add_argument("--trial", type=int, default=0)
    cr.set_defaults(func=cmd_crlb)

    bn = sub.add_parser("bench", help="run a Monte-Carlo experiment and write its CSV")
    bn.add_argument("experiment", choices=sorted(_BENCH))
    bn.add_argument("config")
    bn.add_argument("--out", default=".", help="output directory for the CSV")
    bn.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CaseParseError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FppFailure as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
