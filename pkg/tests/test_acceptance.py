"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The Monte-Carlo experiments (criteria 1 to 4) run once per session at full
size (100 trials per configuration) through the same drivers as the
``fppse bench`` subcommands; criterion 7 inspects the per-trial logs of those
runs.  Expect several minutes on one core.
"""
import math

import numpy as np
import pytest

from oracles import admittance_oracle, central_difference, physics_value
from fppse.bench import run_mse_vs_types, run_success_table
from fppse.caseio import BUNDLED_CASES, config_from_dict, parse_case
from fppse.cli import main
from fppse.crlb import crlb_bound, fisher_information, negative_log_likelihood, real_gradient, wirtinger_gradient
from fppse.fpp import quadratic_bank
from fppse.gn import residual_jacobian
from fppse.measurement import (
    GroundTruth,
    add_awgn,
    build_set,
    classical_pf_spec,
    random_state,
    type_prefix_items,
    type_prefix_spec,
)
from fppse.network import MeasurementKind, all_locations, build_admittance, evaluate, measurement_matrix

pytestmark = pytest.mark.slow

CASES = ["case5", "case9", "case14", "case24_ieee_rts", "case30", "case39"]
LABELS = {"case5": 5, "case9": 9, "case14": 14, "case24_ieee_rts": 24, "case30": 30, "case39": 39}
THETAS = (0.1 * math.pi, 0.3 * math.pi)
SEED = 1

# Gauss-Newton success rates of the reference tables (percent)
GN_TABLE = {
    (5, 0): 100, (9, 0): 100, (14, 0): 100, (24, 0): 100,
    (9, 1): 55, (14, 1): 33, (30, 1): 0,
}


@pytest.fixture(scope="module")
def success_run():
    cfg = config_from_dict({"case_path": CASES, "theta_max": list(THETAS), "trials": 100, "seed": SEED})
    log: list = []
    rows = run_success_table(cfg, log)
    rates = {(LABELS[r["case"]], THETAS.index(r["theta"]), r["solver"]): 100.0 * r["rate"] for r in rows}
    return rates, log


@pytest.fixture(scope="module")
def mse_run():
    cfg = config_from_dict(
        {"case_path": "case14", "theta_max": 0.4 * math.pi, "trials": 100, "seed": SEED,
         "noise_sigmas": {"all": 0.1}, "type_counts": [3, 4, 5, 6, 7]}
    )
    log: list = []
    rows = run_mse_vs_types(cfg, log)
    return rows, log


def _fmt_rates(rates, keys):
    return ", ".join(f"{n}-bus {rates[k]:.0f}%" for k, n in keys)


def test_criterion_1_fpp_small_angles(success_run, acceptance_report):
    rates, _ = success_run
    keys = [((LABELS[c], 0, "fpp"), LABELS[c]) for c in CASES]
    ok = all(rates[k] >= 98 for k, _ in keys)
    acceptance_report(1, "FPP power-flow success >= 98% at theta = 0.1 pi", ok, _fmt_rates(rates, keys))
    assert ok


def test_criterion_2_fpp_large_angles(success_run, acceptance_report):
    rates, _ = success_run
    keys = [((LABELS[c], 1, "fpp"), LABELS[c]) for c in CASES]
    ok = all(rates[k] >= 95 for k, _ in keys)
    acceptance_report(2, "FPP power-flow success >= 95% at theta = 0.3 pi", ok, _fmt_rates(rates, keys))
    assert ok


def test_criterion_3_gauss_newton_trend(success_run, acceptance_report):
    rates, _ = success_run
    parts, ok = [], True
    for (n, ti), want in GN_TABLE.items():
        got = rates[(n, ti, "gn")]
        band = 10 if ti == 0 else 20
        ok &= abs(got - want) <= band
        parts.append(f"{n}-bus@{'0.1' if ti == 0 else '0.3'}pi {got:.0f}% (ref {want}±{band})")
    acceptance_report(3, "Gauss-Newton rates track the reference tables", ok, "; ".join(parts))
    assert ok


def test_criterion_4_mse_above_crlb(mse_run, acceptance_report):
    rows, _ = mse_run
    fpp = {r["types_used"]: r for r in rows if r["solver"] == "fpp"}
    above = all(fpp[k]["mse"] >= fpp[k]["crlb_trace"] for k in fpp)
    ratio7 = fpp[7]["mse"] / fpp[7]["crlb_trace"]
    ok = above and ratio7 <= 5.0
    detail = ", ".join(f"k={k} mse/crlb={fpp[k]['mse'] / fpp[k]['crlb_trace']:.2f}" for k in sorted(fpp))
    acceptance_report(4, "FPP MSE >= CRLB trace for k = 3..7 and <= 5x at k = 7", ok, detail)
    assert ok


def test_criterion_5_rank_deficiency(acceptance_report):
    rng = np.random.default_rng(SEED)
    nets = {c: parse_case(c) for c in CASES}
    ys = {c: build_admittance(n) for c, n in nets.items()}
    worst = 0.0
    for i in range(1000):
        case = CASES[i % len(CASES)]
        net = nets[case]
        truth = random_state(net, rng.uniform(0, math.pi), (0.8, 1.2), rng)
        items = type_prefix_items(net, 7)
        pick = rng.choice(len(items), size=rng.integers(1, len(items) + 1), replace=False)
        mset = build_set(net, [items[j] for j in sorted(pick)], truth, ys[case])
        mset = add_awgn(mset, float(rng.uniform(0.01, 0.2)), rng)
        fi = fisher_information(truth.v, mset)
        norm = np.linalg.norm(fi.f, 2)
        worst = max(worst, np.linalg.norm(fi.f @ fi.null_vector()) / norm)
    ranks = {}
    for case, net in nets.items():
        truth = random_state(net, 0.4 * math.pi, rng=rng)
        mset = add_awgn(type_prefix_spec(net, truth, 7, ys[case]), 0.1, rng)
        ranks[LABELS[case]] = crlb_bound(fisher_information(truth.v, mset)).numerical_rank
    full_ok = all(r == 2 * n - 1 for n, r in ranks.items())
    ok = worst <= 1e-8 and full_ok
    detail = f"max |F n|/|F| = {worst:.1e} over 1000 instances; full-set ranks " + ", ".join(
        f"{n}-bus {r}" for n, r in ranks.items()
    )
    acceptance_report(5, "Fisher information annihilates the phase direction, rank 2N-1", ok, detail)
    assert ok


def test_criterion_6_physics_oracle(acceptance_report):
    rng = np.random.default_rng(SEED)
    worst, count = 0.0, 0
    for case in BUNDLED_CASES:
        net = parse_case(case)
        y = build_admittance(net)
        ydense = admittance_oracle(net)
        mats = [
            (kind, loc, measurement_matrix(net, y, kind, loc))
            for kind in MeasurementKind
            for loc in all_locations(net, kind)
        ]
        for _ in range(100):
            v = rng.uniform(0.9, 1.1, net.n_buses) * np.exp(1j * rng.uniform(-math.pi, math.pi, net.n_buses))
            for kind, loc, h in mats:
                err = abs(evaluate(h, v) - physics_value(net, ydense, kind.value, loc, v))
                worst = max(worst, err)
                count += 1
    ok = worst <= 1e-10
    acceptance_report(6, "all seven kinds match AC circuit laws", ok, f"max abs error {worst:.1e} over {count} evaluations")
    assert ok


def test_criterion_7_structural_invariants(success_run, mse_run, acceptance_report):
    logs = [e for e in success_run[1] + mse_run[1] if e["solver"] == "fpp"]
    worst_rise = max(float(np.max(np.diff(e["objective_history"]), initial=-np.inf)) for e in logs)
    monotone = worst_rise <= 1e-6

    worst_split = 0.0
    sets = [classical_pf_spec(parse_case(c), GroundTruth(np.ones(LABELS[c], complex))) for c in CASES]
    sets.append(type_prefix_spec(parse_case("case14"), GroundTruth(np.ones(14, complex)), 7))
    for mset in sets:
        for q in quadratic_bank(mset).quadratics:
            worst_split = max(worst_split, float(np.max(np.abs(q.hplus + q.hminus - q.hbar))))
    split_ok = worst_split <= 1e-10

    def stationary(e):
        return e["gradient_norm"] is not None and e["gradient_norm"] <= 1e-3 * (1 + e["objective_history"][-1])

    # the stationarity bound concerns estimation runs; noiseless power-flow
    # runs stop at objectives near 1e-9 and are reported for information only
    psse = [e for e in mse_run[1] if e["solver"] == "fpp" and e["status"] == "Converged"]
    pf = [e for e in success_run[1] if e["solver"] == "fpp" and e["status"] == "Converged"]
    stat_ok = bool(psse) and all(stationary(e) for e in psse)
    ok = monotone and split_ok and stat_ok
    detail = (
        f"{len(logs)} FPP runs, largest objective increase {worst_rise:.1e}; "
        f"split error {worst_split:.1e}; stationary {sum(map(stationary, psse))}/{len(psse)} converged PSSE runs "
        f"({sum(map(stationary, pf))}/{len(pf)} power-flow runs)"
    )
    acceptance_report(7, "FPP monotone descent, exact eigen-split, stationarity", ok, detail)
    assert ok


def test_criterion_8_gradient_oracles(acceptance_report):
    net = parse_case("case14")
    y = build_admittance(net)
    rng = np.random.default_rng(SEED)
    worst_w, worst_j = 0.0, 0.0
    free = [k for k in range(14) if k != net.slack]
    for _ in range(20):
        truth = random_state(net, 0.4 * math.pi, rng=rng)
        mset = add_awgn(type_prefix_spec(net, truth, 7, y), 0.1, rng)
        v = random_state(net, 0.4 * math.pi, rng=rng).v
        u = np.concatenate([v.real, v.imag])
        fd = central_difference(lambda x: negative_log_likelihood(x[:14] + 1j * x[14:], mset), u)[0]
        g = real_gradient(wirtinger_gradient(v, mset)[1])
        worst_w = max(worst_w, np.max(np.abs(g - fd)) / np.max(np.abs(fd)))

        ang0 = np.angle(v)

        def h(x):
            ang = ang0.copy()
            ang[free] = x[14:]
            return mset.predict(x[:14] * np.exp(1j * ang))

        x = np.concatenate([np.abs(v), ang0[free]])
        jfd = central_difference(h, x)
        _, jac = residual_jacobian(v, mset)
        worst_j = max(worst_j, float(np.max(np.abs(jac - jfd) / np.maximum(np.abs(jfd), 1.0))))
    ok = worst_w <= 1e-5 and worst_j <= 1e-5
    acceptance_report(8, "gradients match central differences", ok,
                      f"Wirtinger rel err {worst_w:.1e}, Jacobian rel err {worst_j:.1e} over 20 instances")
    assert ok


def test_criterion_9_reproducible_csvs(tmp_path, acceptance_report):
    import json

    configs = {
        "tables": ({"case_path": ["case9", "case14"], "theta_max": [0.3 * math.pi], "trials": 5, "seed": SEED},
                   "success.csv"),
        "mse-vs-types": ({"case_path": "case14", "theta_max": 0.4 * math.pi, "trials": 3, "seed": SEED,
                          "noise_sigmas": {"all": 0.1}, "type_counts": [3, 5]}, "mse.csv"),
        "perbus": ({"case_path": "case30", "theta_max": 0.4 * math.pi, "trials": 3, "seed": SEED,
                    "measurement_selector": "type-prefix:3",
                    "noise_sigmas": {"power": 0.05, "voltage": 0.02}}, "perbus.csv"),
    }
    same = {}
    for sub, (doc, name) in configs.items():
        cfg = tmp_path / f"{sub}.json"
        cfg.write_text(json.dumps(doc))
        outs = []
        for run in ("first", "second"):
            out = tmp_path / sub / run
            assert main(["bench", sub, str(cfg), "--out", str(out)]) == 0
            outs.append((out / name).read_bytes())
        same[sub] = outs[0] == outs[1]
    ok = all(same.values())
    acceptance_report(9, "bench CSVs are byte-identical across reruns", ok,
                      ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok
