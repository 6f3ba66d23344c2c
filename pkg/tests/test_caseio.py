"""MATPOWER parsing, experiment configs and result CSVs."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fppse.caseio import (
    BUNDLED_CASES,
    CSV_HEADERS,
    CaseParseError,
    ConfigError,
    ExperimentConfig,
    MalformedTableError,
    MissingSlackError,
    NonNumericFieldError,
    config_from_dict,
    load_config,
    parse_case,
    parse_case_text,
    read_results_csv,
    save_config,
    serialize_case,
    write_results_csv,
)
from fppse.network import BusKind, build_admittance
from oracles import admittance_oracle

TWO_BUS = """
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0  0  0  0  1  1  0  0  1  1.1  0.9;
    2  1  10 5  0  0  1  1  0  0  1  1.1  0.9;
];
mpc.gen = [ 1 0 0 0 0 1 100 1 0 0 ];
mpc.branch = [
    1  2  0  1  0  0  0  0  0  0  1  -360  360;  % lossless line
];
"""


def test_two_bus_text():
    net = parse_case_text(TWO_BUS, "tiny")
    assert net.n_buses == 2 and net.n_branches == 1
    assert net.branches[0].series_admittance == -1j
    assert net.buses[0].kind is BusKind.SLACK
    assert net.buses[1].shunt_b == pytest.approx(0.0)
    assert net.buses[0].shunt_g == 0.0


def test_case9_counts():
    net = parse_case("case9")
    assert (net.n_buses, net.n_branches) == (9, 9)
    assert sum(b.kind is BusKind.SLACK for b in net.buses) == 1


def test_case14_builds_admittance():
    net = parse_case("case14")
    assert net.n_buses == 14
    np.testing.assert_allclose(build_admittance(net).toarray(), admittance_oracle(net), atol=1e-12)


@pytest.mark.parametrize("name", BUNDLED_CASES)
def test_bundled_cases_parse_connected(name):
    net = parse_case(name)
    assert net.is_connected()
    assert sum(b.kind is BusKind.SLACK for b in net.buses) == 1


def test_bus_shunts_scaled_by_base():
    text = TWO_BUS.replace("2  1  10 5  0  0", "2  1  10 5  3  4")
    net = parse_case_text(text)
    assert net.buses[1].shunt_g == pytest.approx(0.03)
    assert net.buses[1].shunt_b == pytest.approx(0.04)


def test_out_of_service_branch_dropped():
    extra = TWO_BUS.replace(
        "1  2  0  1  0  0  0  0  0  0  1  -360  360;  % lossless line",
        "1  2  0  1  0  0  0  0  0  0  1  -360  360;\n    1  2  0  2  0  0  0  0  0  0  0  -360  360;",
    )
    assert parse_case_text(extra).n_branches == 1


def test_tap_and_shift_columns():
    text = TWO_BUS.replace("1  2  0  1  0  0  0  0  0  0  1", "1  2  0  1  0.2  0  0  0  0.95  30  1")
    br = parse_case_text(text).branches[0]
    assert br.tap_ratio == 0.95
    assert br.phase_shift == pytest.approx(math.pi / 6)
    assert br.shunt_from == pytest.approx(0.1j) and br.shunt_to == pytest.approx(0.1j)


def test_errors_are_distinct_and_located():
    with pytest.raises(NonNumericFieldError, match="row 2, column 3"):
        parse_case_text(TWO_BUS.replace("2  1  10 5", "2  1  x 5"))
    with pytest.raises(MalformedTableError, match="row 2"):
        parse_case_text(TWO_BUS.replace("2  1  10 5  0  0  1  1  0  0  1  1.1  0.9", "2  1  10"))
    with pytest.raises(MissingSlackError, match="column 2"):
        parse_case_text(TWO_BUS.replace("1  3  0  0", "1  2  0  0"))
    with pytest.raises(MalformedTableError):
        parse_case_text("mpc.baseMVA = 100;")
    assert issubclass(MissingSlackError, CaseParseError)


def test_unknown_case_name():
    with pytest.raises(FileNotFoundError):
        parse_case("case_does_not_exist")


def _networks_close(a, b):
    assert a.n_buses == b.n_buses and a.n_branches == b.n_branches
    assert a.base_mva == b.base_mva
    for x, y in zip(a.buses, b.buses):
        assert (x.id, x.kind, x.label) == (y.id, y.kind, y.label)
        assert x.shunt_g == pytest.approx(y.shunt_g, abs=1e-15)
        assert x.shunt_b == pytest.approx(y.shunt_b, abs=1e-15)
    for x, y in zip(a.branches, b.branches):
        assert (x.from_bus, x.to_bus) == (y.from_bus, y.to_bus)
        assert x.series_admittance == pytest.approx(y.series_admittance, rel=1e-14)
        assert x.shunt_from == pytest.approx(y.shunt_from, abs=1e-15)
        assert x.tap_ratio == y.tap_ratio
        assert x.phase_shift == pytest.approx(y.phase_shift, abs=1e-15)


@pytest.mark.parametrize("name", BUNDLED_CASES)
def test_serialize_round_trip(name):
    net = parse_case(name)
    _networks_close(parse_case_text(serialize_case(net), net.name), net)


# ---------------------------------------------------------------- configs


def test_config_echo():
    cfg = config_from_dict({"trials": 100, "theta_max": 0.1 * math.pi, "measurement_selector": "classical-pf"})
    assert cfg.trials == 100
    assert cfg.theta == pytest.approx(0.1 * math.pi)
    assert cfg.measurement_selector == "classical-pf"
    assert cfg.vmag_range == (0.9, 1.1)


def test_type_prefix_selector():
    assert config_from_dict({"measurement_selector": "type-prefix:5"}).measurement_selector == "type-prefix:5"
    with pytest.raises(ConfigError):
        config_from_dict({"measurement_selector": "type-prefix:8"})


def test_explicit_selector():
    cfg = config_from_dict({"measurement_selector": [["Vmag2", 1], ["PflowF", [1, 2]]]})
    assert cfg.measurement_selector == (("Vmag2", 1), ("PflowF", (1, 2)))


@pytest.mark.parametrize(
    "doc, pointer",
    [
        ({"measurement_selector": []}, "/measurement_selector"),
        ({"bogus": 1}, "/bogus"),
        ({"trials": 0}, "/trials"),
        ({"theta_max": 4.0}, "/theta_max"),
        ({"vmag_range": [1.1, 0.9]}, "/vmag_range"),
        ({"noise_sigmas": {"Pinj": -1}}, "/noise_sigmas/Pinj"),
        ({"noise_sigmas": {"nope": 1}}, "/noise_sigmas/nope"),
        ({"fpp": {"max_iter": 0}}, "/fpp/max_iter"),
        ({"measurement_selector": [["Pinj", [1, 2]]]}, "/measurement_selector/0/1"),
        ({"solvers": ["sdr"]}, "/solvers/0"),
    ],
)
def test_config_errors_carry_pointer(doc, pointer):
    with pytest.raises(ConfigError) as info:
        config_from_dict(doc)
    assert info.value.pointer == pointer


def test_config_file_round_trip(tmp_path):
    cfg = config_from_dict(
        {
            "case_path": ["case9", "case14"],
            "seed": 2**63 + 5,
            "theta_max": [0.1 * math.pi, 0.3 * math.pi],
            "noise_sigmas": {"power": 0.05, "voltage": 0.02},
            "measurement_selector": [["Vmag2", 1], ["QflowT", [4, 5]]],
            "penalty": "l1",
            "fpp": {"max_iter": 50, "eps": 1e-7},
        }
    )
    path = tmp_path / "cfg.json"
    save_config(path, cfg)
    assert load_config(path) == cfg


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


# ---------------------------------------------------------------- CSVs

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, finite, st.integers(0, 10**6)), min_size=1, max_size=8))
def test_csv_round_trip_is_lossless(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "mse.csv"
    data = [
        {"case": "case14", "types_used": 3, "solver": "fpp", "mse": a, "crlb_trace": b, "diverged": d}
        for a, b, d in rows
    ]
    write_results_csv(path, data)
    back = read_results_csv(path)
    assert back == data


def test_csv_headers_and_line_endings(tmp_path):
    path = tmp_path / "success.csv"
    write_results_csv(path, [{"case": "case5", "theta": 0.1, "solver": "gn", "trials": 3, "successes": 2, "rate": 2 / 3}])
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(CSV_HEADERS["success"])
    assert lines[1] == "case5,0.10000000000000001,gn,3,2,0.66666666666666663"


def test_csv_rejects_wrong_columns(tmp_path):
    with pytest.raises(ValueError):
        write_results_csv(tmp_path / "perbus.csv", [{"case": "x"}])
    with pytest.raises(OSError):
        write_results_csv(tmp_path / "missing" / "perbus.csv", [])


def test_config_json_is_plain(tmp_path):
    cfg = ExperimentConfig()
    save_config(tmp_path / "c.json", cfg)
    doc = json.loads((tmp_path / "c.json").read_text())
    assert config_from_dict(doc) == cfg
