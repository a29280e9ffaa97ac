import json
import subprocess
import sys
from pathlib import Path

import pytest

from mibgap import formats
from mibgap.cli import main

ROOT = Path(__file__).resolve().parents[1]
INST = ROOT / "instances"
GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, formats.loads(out)


def test_solve_sat(capsys, tmp_path):
    code, rep = run(capsys, "solve", INST / "trivial_sat.json")
    assert code == 0 and rep["verdict"] == "sat" and "witness" in rep
    out = tmp_path / "rep.json"
    assert main(["solve", str(INST / "trivial_sat.json"), "-o", str(out)]) == 0
    capsys.readouterr()
    code, chk = run(capsys, "check", INST / "trivial_sat.json", out)
    assert code == 0 and chk["ok"]


def test_solve_unsat_and_check_certificate(capsys, tmp_path):
    code, rep = run(capsys, "solve", INST / "trivial_unsat.json", "--epsilon", "1/4")
    assert code == 1 and rep["verdict"] == "unsat" and "certificate" not in rep
    out = tmp_path / "rep.json"
    assert main(["solve", str(INST / "trivial_unsat.json"), "--epsilon", "1/4",
                 "--certificates", "-o", str(out)]) == 1
    code, chk = run(capsys, "check", INST / "trivial_unsat.json", out)
    assert code == 0 and chk["ok"]
    # the same certificate does not refute the satisfiable system
    code, chk = run(capsys, "check", INST / "trivial_sat.json", out)
    assert code == 1 and chk["problems"]


def test_solve_explain(capsys):
    code, rep = run(capsys, "solve", INST / "ledger_reference.json", "--explain")
    assert rep["ledger"]["kappa2"] == "42" and rep["ledger"]["U_size"] == "23"


def test_doubleexp(capsys, tmp_path):
    code, rep = run(capsys, "solve", INST / "doubleexp_n2.json", "--epsilon", "1/8")
    assert code == 0 and int(rep["witness"]["x"][1]) >= 4
    code, chk = run(capsys, "check", INST / "doubleexp_n2.json", INST / "doubleexp_n2_witness.json")
    assert code == 0


def test_oracle_golden(capsys):
    code, rep = run(capsys, "oracle", INST / "doubleexp_n2.json", "--epsilon", "1/8", "--xbound", "8")
    assert code == 0
    assert formats.dumps(rep) == (GOLDEN / "doubleexp_n2_oracle.json").read_text()


def test_perturbed_witness_fails(capsys, tmp_path):
    doc = formats.load(INST / "doubleexp_n2_witness.json")
    doc["x"][0] = "3"  # x1 is pinned to 2
    p = tmp_path / "w.json"
    p.write_text(formats.dumps(doc))
    code, chk = run(capsys, "check", INST / "doubleexp_n2.json", p)
    assert code == 1 and not chk["ok"]


def test_gen_hilbert(capsys, tmp_path):
    out = tmp_path / "h.json"
    assert main(["gen", "hilbert", "--eq", "x1 = x1 + x1", "-o", str(out)]) == 0
    code, rep = run(capsys, "solve", out, "--budget-ms", "120000")
    assert code == 1


def test_gen_random_deterministic(capsys):
    code, a = run(capsys, "gen", "random", "--seed", "5")
    code, b = run(capsys, "gen", "random", "--seed", "5")
    assert code == 0 and a == b and a["kind"] == "mib"


def test_dominate(capsys, tmp_path):
    fig = INST / "odd_even_negated.json"
    out = tmp_path / "dom.json"
    code = main(["dominate", str(fig), "--gamma=-3/4,-7/4", "--epsilon", "1/4", "--enumerate", "7,3",
                 "-o", str(out)])
    assert code == 0
    code, chk = run(capsys, "check", fig, out)
    assert code == 0 and chk["ok"]
    code, rep = run(capsys, "dominate", fig, "--gamma=-5/4,-9/4", "--epsilon", "1/4", "--enumerate", "7,3")
    assert code == 2 and rep["verdict"] == "unknown"


def test_dominate_pieces_file(capsys, tmp_path):
    fig = INST / "odd_even_negated.json"
    pieces = {"kind": "pieces", "d": 2, "tag": "exact", "pieces": [{"base": [0, 0, 0, 0, 0, 0], "periods": []}]}
    p = tmp_path / "p.json"
    p.write_text(formats.dumps(pieces))
    code, rep = run(capsys, "dominate", fig, "--gamma=-1,-1", "--pieces", p)
    assert code == 1 and rep["verdict"] == "not-dominated"


@pytest.mark.parametrize("argv", [
    ["dominate", str(INST / "odd_even_negated.json"), "--gamma=-1", "--enumerate", "3,3"],
    ["solve", str(INST / "missing.json")],
    ["frobnicate"],
    [],
    ["solve", str(INST / "trivial_sat.json"), "--epsilon", "0"],
    ["solve", str(INST / "trivial_sat.json"), "--threads", "0"],
    ["dominate", str(INST / "odd_even_negated.json"), "--gamma=-1,-1"],
])
def test_usage_errors(capsys, argv):
    code, rep = run(capsys, *argv)
    assert code == 3 and rep["kind"] == "error"


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("MIBGAP_THREADS", "2")
    code, rep = run(capsys, "solve", INST / "trivial_sat.json")
    assert rep["threads"] == "2"
    monkeypatch.setenv("MIBGAP_THREADS", "many")
    code, rep = run(capsys, "solve", INST / "trivial_sat.json")
    assert code == 3


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "mibgap.cli", "solve", str(INST / "trivial_unsat.json"),
                           "--epsilon", "1/4"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["verdict"] == "unsat"
