import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from localizable import __version__, bases
from localizable.cli import main
from localizable.engine import protocol_from_dict, result_distribution
from localizable.linalg import StateVector
from localizable.states import parse_state


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out) if out.strip() else None


# state notation


@pytest.mark.parametrize("text,want", [
    ("00", [1, 0, 0, 0]),
    ("1+", [0, 0, 1 / math.sqrt(2), 1 / math.sqrt(2)]),
    ("bell:2", [0, 1 / math.sqrt(2), -1 / math.sqrt(2), 0]),
    ("bell:Phi+", [1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)]),
    ("[0, 1, 0, 0]", [0, 1, 0, 0]),
    ('[[0.6, 0], "0.8j", 0, 0]', [0.6, 0.8j, 0, 0]),
])
def test_parse_state(text, want):
    assert np.allclose(parse_state(text, 2).amps, want)


def test_parse_named_eigenstates():
    assert np.allclose(parse_state("ejm:1").amps, bases.ejm_basis().vectors[1])
    assert np.allclose(parse_state("ghz3:+000").amps, bases.ghz_state(3))
    assert np.allclose(parse_state("ghz:3:-001").amps, bases.ghz_basis(3).state("-001").amps)
    assert np.allclose(parse_state("haar:4", 2).amps, parse_state("haar:4", 2).amps)


@pytest.mark.parametrize("text", ["", "0x", "bell:9", "haar:", "haar:q", "[1, 1]", "[1, 0", "ejm:Phi+", ":1"])
def test_parse_state_errors(text):
    with pytest.raises(ValueError):
        parse_state(text, 2)


def test_parse_state_size_check():
    with pytest.raises(ValueError):
        parse_state("000", 2)


# run


def test_run_twisted(capsys):
    code, out = run_json(capsys, "run", "twisted", "--input", "00")
    assert code == 0
    assert out["distribution"] == pytest.approx({"00": 1, "01": 0, "1+": 0, "1-": 0})
    assert out["version"] == __version__
    assert out["config"]["input"] == "00"
    assert set(out["tolerances"]) >= {"construct", "equal", "prune"}


def test_run_ejm_eigenstate(capsys):
    code, out = run_json(capsys, "run", "ejm", "--input", "ejm:2")
    assert code == 0 and out["distribution"]["2"] == pytest.approx(1)


def test_run_samples_three_sigma(capsys):
    code, out = run_json(capsys, "run", "bsm", "--input", "haar:3", "--samples", "100000", "--seed", "9")
    assert code == 0
    assert out["samples"]["within_3sigma"]
    assert sum(r["count"] for r in out["samples"]["rows"]) == 100_000


def test_run_is_reproducible(capsys):
    _, a = run_json(capsys, "run", "bsm", "-i", "haar:1", "--samples", "500", "--seed", "2")
    _, b = run_json(capsys, "run", "bsm", "-i", "haar:1", "--samples", "500", "--seed", "2")
    assert a == b


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("LOCALIZABLE_SEED", "7")
    _, out = run_json(capsys, "run", "twisted", "-i", "01")
    assert out["config"]["seed"] == 7
    monkeypatch.setenv("LOCALIZABLE_SEED", "x")
    assert run(capsys, "run", "twisted", "-i", "01")[0] == 2


@pytest.mark.parametrize("argv", [
    ["run", "nope", "-i", "00"],
    ["run", "twisted", "-i", "0x"],
    ["run", "twisted"],
    ["run", "ejm", "-i", "00", "--max-qubits", "6"],
    ["verify", "twisted", "--checks", "magic"],
    ["search", "--target", "nope"],
    ["search", "--target", "bell", "--budget", "0"],
    ["bogus"],
])
def test_usage_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_table_format(capsys):
    code, out, _ = run(capsys, "run", "twisted", "-i", "10", "--format", "table")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["label", "probability"]
    assert any(line.startswith("1+") and "0.5" in line for line in lines)


# verify


def test_verify_sorkin(capsys):
    code, out = run_json(capsys, "verify", "sorkin-naive", "--checks", "nosig")
    assert code == 1
    rep = out["reports"][0]
    assert rep["verdict"] == "fail" and rep["value"] == pytest.approx(0.5)
    assert run(capsys, "verify", "sorkin-naive", "--checks", "nosig", "--expect-fail")[0] == 0


def test_verify_bsm_ideal_all_pass(capsys):
    code, out = run_json(capsys, "verify", "bsm-ideal", "--checks", "born,nosig,ideal,erasure")
    assert code == 0
    assert [r["verdict"] for r in out["reports"]] == ["pass"] * 4


def test_verify_twisted_not_ideal(capsys):
    code, out = run_json(capsys, "verify", "twisted", "--checks", "ideal")
    assert code == 1
    assert out["reports"][0]["witnesses"]
    assert run(capsys, "verify", "twisted", "--checks", "ideal,born", "--expect-fail")[0] == 1


# search, export, report


def test_search_small(capsys):
    code, out = run_json(capsys, "search", "--target", "bell", "--restarts", "2", "--budget", "400", "--seed", "1")
    assert code == 0
    res = out["result"]
    assert res["evidence"] == "numerical evidence"
    assert len(res["best_params"]) == 30
    assert "traces" not in res
    code, _ = run_json(capsys, "search", "--target", "ejm", "--restarts", "1", "--budget", "50",
                       "--min-score", "0.999")
    assert code == 1


def test_export_round_trip(capsys, tmp_path):
    path = tmp_path / "ejm.json"
    assert run(capsys, "export-protocol", "ejm", "--output", str(path))[0] == 0
    p = protocol_from_dict(json.loads(path.read_text()))
    assert result_distribution(p, StateVector(bases.ejm_basis().vectors[3]))["3"] == pytest.approx(1)
    assert [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")] == []


def test_paper_report_without_search(capsys, tmp_path):
    path = tmp_path / "report.json"
    code, _, _ = run(capsys, "paper-report", "--skip-search", "-o", str(path))
    assert code == 0
    out = json.loads(path.read_text())
    assert out["summary"]["rows"] >= 10 and out["summary"]["failed"] == 0
    sorkin = [r for r in out["rows"] if r["subject"] == "sorkin-naive"]
    assert sorkin[0]["value"] == pytest.approx(0.5)


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "localizable.cli", "run", "bsm", "-i", "bell:1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["distribution"]["Psi+"] == pytest.approx(1)
