"""Command-line entry point: output, files and exit codes."""
import json
import math
import subprocess
import sys

import pytest

from fppse.caseio import read_results_csv
from fppse.cli import EXIT_CONFIG, EXIT_OK, main


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def se_config(tmp_path):
    return _write(tmp_path / "se.json", {"case_path": "case14", "theta_max": 0.2 * math.pi, "seed": 4,
                                         "measurement_selector": "type-prefix:3", "noise_sigmas": {"all": 0.1}})


def test_pf_prints_state(capsys):
    assert main(["pf", "case9", "--theta", "0.1pi", "--seed", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "success=True" in out
    assert len([line for line in out.splitlines() if line.strip()[:1].isdigit()]) == 9


def test_pf_with_gn(capsys):
    assert main(["pf", "case5", "--solver", "gn", "--theta", "0.1"]) == EXIT_OK
    assert "solver=gn" in capsys.readouterr().out


def test_pf_unknown_case(capsys):
    assert main(["pf", "case_nope"]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_pf_bad_angle():
    with pytest.raises(SystemExit) as info:
        main(["pf", "case9", "--theta", "4"])
    assert info.value.code == 2


def test_se(se_config, capsys):
    assert main(["se", se_config]) == EXIT_OK
    out = capsys.readouterr().out
    assert "fpp: status=" in out and "gn: status=" in out


def test_crlb_json(se_config, capsys):
    assert main(["crlb", se_config, "--trial", "1"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["case"] == "case14" and doc["measurements"] == 54
    assert doc["trace_bound"] > 0 and doc["numerical_rank"] <= 27


def test_crlb_needs_noise(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"case_path": "case9"})
    assert main(["crlb", cfg]) == EXIT_CONFIG
    assert "/noise_sigmas" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.json", {"trials": -1})
    assert main(["se", cfg]) == EXIT_CONFIG
    assert "/trials" in capsys.readouterr().err
    assert main(["se", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_bench_tables_byte_identical(tmp_path):
    cfg = _write(tmp_path / "t.json", {"case_path": ["case5"], "theta_max": [0.1 * math.pi, 0.3 * math.pi],
                                        "trials": 3, "seed": 9})
    for d in ("a", "b"):
        assert main(["bench", "tables", cfg, "--out", str(tmp_path / d)]) == EXIT_OK
    a, b = (tmp_path / "a" / "success.csv").read_bytes(), (tmp_path / "b" / "success.csv").read_bytes()
    assert a == b
    rows = read_results_csv(tmp_path / "a" / "success.csv")
    assert len(rows) == 4
    timing = json.loads((tmp_path / "a" / "success_timing.json").read_text())
    assert len(timing) == 12


def test_bench_wrong_experiment_for_config(tmp_path):
    cfg = _write(tmp_path / "t.json", {"case_path": "case5", "trials": 1})
    assert main(["bench", "mse-vs-types", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_console_module_entry():
    res = subprocess.run([sys.executable, "-m", "fppse.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "bench" in res.stdout
