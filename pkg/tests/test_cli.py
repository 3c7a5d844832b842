from __future__ import annotations

import json
import subprocess
import sys

import pytest

from borderlab import __version__
from borderlab.cli import EXIT_BUDGET, EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, main
from borderlab.decomp import omega_bound
from borderlab.koszul import lower_bound
from borderlab.tensor import Tensor3, catalog, kronecker


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    report = None
    if out.out.strip().startswith("{"):
        report = json.loads(out.out)
    return code, report, out.err


def test_reports_carry_command_and_version(capsys):
    code, rep, _ = run(capsys, "omega-bound", "8", "1", "10")
    assert code == EXIT_OK
    assert rep["command"] == "omega-bound" and rep["version"] == __version__
    assert rep["omega"] == pytest.approx(omega_bound(8, 1, 10), abs=1e-12)


def test_pretty_output_and_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, rep, _ = run(capsys, "catalog", "show", "cw:2", "--pretty", "--out", str(out))
    assert code == EXIT_OK and rep is None
    saved = json.loads(out.read_text())
    assert saved["command"] == "catalog"


def test_catalog_list(capsys):
    code, rep, _ = run(capsys, "catalog", "list")
    assert code == EXIT_OK and "cw" in json.dumps(rep)


def test_kron_saves_the_product(capsys, tmp_path):
    path = tmp_path / "t.json"
    code, _, _ = run(capsys, "kron", "cw:2", "skewcw:2", "--save", str(path))
    assert code == EXIT_OK
    T = Tensor3.from_json(json.loads(path.read_text()))
    assert T == kronecker(catalog("cw", 2), catalog("skewcw", 2))


def test_koszul_bound_matches_library(capsys):
    code, rep, _ = run(capsys, "koszul-bound", "--tensor", "cw:3", "--p", "1")
    assert code == EXIT_OK
    assert rep["bound"] == lower_bound(catalog("cw", 3), "A", 1).bound


def test_verify_exit_codes(capsys):
    assert run(capsys, "verify", "--decomp", "builtin:cw:2", "--target", "cw:2")[0] == EXIT_OK
    code, rep, _ = run(capsys, "verify", "--decomp", "builtin:cw:2", "--target", "unit:3")
    assert code == EXIT_NEGATIVE and rep["passed"] is False


def test_usage_errors(capsys):
    code, _, err = run(capsys, "koszul-bound", "--tensor", "nosuch:3", "--p", "1")
    assert code == EXIT_USAGE and "nosuch" in err
    assert run(capsys, "koszul-bound", "--p", "1")[0] == EXIT_USAGE  # argparse: missing --tensor
    assert run(capsys, "reproduce", "no-such-claim")[0] == EXIT_USAGE
    assert run(capsys, "solve", "--starts", "1")[0] == EXIT_USAGE


def test_budget_exit_code(capsys):
    code, rep, _ = run(capsys, "minrank-cert", "--tensor", "cw:2", "--power", "2", "--p", "3", "--budget", "5")
    assert code == EXIT_BUDGET and rep["error"] == "budget exceeded"


def test_tight_weights_negative(capsys):
    code, _, _ = run(capsys, "tight-weights", "--tensor", "cw:2", "--time-limit", "10")
    assert code == EXIT_NEGATIVE


def test_apolarity_weak(capsys):
    code, rep, _ = run(capsys, "apolarity", "--mode", "weak", "--m", "9", "--r", "18")
    assert code == EXIT_OK and rep["passed"]


def test_solve_roundtrip_through_files(capsys, tmp_path):
    prob, dec = tmp_path / "p.json", tmp_path / "d.json"
    code, rep, _ = run(capsys, "solve", "--tensor", "unit:2", "--r", "2", "--starts", "8",
                       "--save-problem", str(prob), "--save-decomposition", str(dec))
    assert code == EXIT_OK and rep["result"]["converged"]
    code, rep, _ = run(capsys, "verify", "--decomp", str(dec), "--target", "unit:2", "--mode", "numeric",
                       "--digits", "30", "--tol", "1e-8")
    assert code == EXIT_OK and rep["passed"]
    code, rep, _ = run(capsys, "solve", "--problem", str(prob), "--starts", "8", "--sparsify")
    assert code == EXIT_OK and rep["result"]["isolated"]


def test_reproduce_single_claims(capsys):
    code, rep, _ = run(capsys, "reproduce", "omega-skewcw8", "verify-cw-q2")
    assert code == EXIT_OK and rep["ok"]
    code, rep, _ = run(capsys, "reproduce", "--list")
    assert code == EXIT_OK and "tight-det3" in rep["claims"]


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "borderlab.cli", "omega-bound", "4", "2", "20"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["omega"] == pytest.approx(omega_bound(4, 2, 20))
