import json
import subprocess
import sys

import pytest

from flowlock import corpus
from flowlock.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

G = str(corpus.path("german", "model.proto.m"))
B = str(corpus.path("german_buggy", "model.proto.m"))
FLOWS = str(corpus.path("german", "flows.flw"))


def inv(name):
    return str(corpus.path("german", f"{name}.invs"))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_pass(capsys):
    code, out, _ = run(capsys, "check", G, "--n", "2", "--flows", FLOWS, "--invs", inv("final"))
    assert code == EXIT_OK
    assert "inv-1.2.2: PASS" in out and "CtrlProp: PASS" in out


def test_check_buggy_sdeadlock_with_footer(capsys, tmp_path):
    js = tmp_path / "r.json"
    code, out, _ = run(capsys, "check", B, "--n", "2", "--flows", FLOWS, "--invs", inv("final"),
                       "--sdeadlock", "--props", "", "--json", str(js))
    assert code == EXIT_FAIL
    assert "TRACE s-deadlock len=10" in out
    assert "BLOCKED " in out
    assert "theorem oracle: CONSISTENT" in out
    data = json.loads(js.read_text())
    assert data["oracle"] == "CONSISTENT"
    assert data["checks"]["s-deadlock"]["verdict"] == "fail"
    assert data["checks"]["inv-1.2.2"]["verdict"] == "fail"


def test_derive_reports_diagnosis(capsys):
    code, out, _ = run(capsys, "derive", G, "--n", "3", "--flows", FLOWS, "--invs", inv("split1"))
    assert code == EXIT_FAIL
    assert "DIAGNOSIS inv-1.2" in out
    assert "at SendGntE" in out and "ShrSet = {}" in out
    assert "witness candidate: member ShrSet" in out


def test_derive_pass(capsys):
    code, out, _ = run(capsys, "derive", G, "--n", "2", "--flows", FLOWS, "--invs", inv("final"))
    assert code == EXIT_OK and "all invariants hold" in out


def test_split_chain(capsys, tmp_path):
    one = tmp_path / "one.invs"
    code, _, _ = run(capsys, "split", "--invs", inv("inv1"), "--inv", "inv-1", "--conf", "!(CurCmd = Empty)",
                     "--ptr", "CurPtr", "--model", G, "-o", str(one))
    assert code == EXIT_OK
    two = tmp_path / "two.invs"
    code, out, _ = run(capsys, "split", "--invs", str(one), "--inv", "inv-1.2", "--conf",
                       "(CurCmd = ReqE | CurCmd = ReqS & ExGntd = true) & ShrSet != {}",
                       "--member", "ShrSet[i] = true", "--model", G, "-o", str(two))
    assert code == EXIT_OK and "inv-1.2.2" in out
    from flowlock.invariants import load_invset
    got = load_invset(two.read_text())
    want = load_invset(corpus.read("german", "final.invs"))
    assert got.invariants == want.invariants
    # the first split's inv-1.1 assertion is kept
    assert [a.name for a in got.assertions] == ["inv-1.1_nonempty"] + [a.name for a in want.assertions]


def test_split_usage_errors(capsys):
    assert run(capsys, "split", "--invs", inv("inv1"), "--inv", "inv-1", "--conf", "true")[0] == EXIT_USAGE
    assert run(capsys, "split", "--invs", inv("inv1"), "--inv", "nope", "--conf", "true",
               "--ptr", "CurPtr")[0] == EXIT_USAGE


def test_abstract(capsys):
    code, out, _ = run(capsys, "abstract", G, "--c", "1")
    assert code == EXIT_OK
    assert "CurCmd = ReqE & CurPtr = Other & ExGntd = false & ShrSet = {}" in out
    assert run(capsys, "abstract", G, "--c", "0")[0] == EXIT_USAGE


def test_cmp_c1(capsys):
    code, out, _ = run(capsys, "cmp", G, "--c", "1", "--flows", FLOWS, "--invs", inv("final"),
                       "--props", "CtrlProp")
    assert code == EXIT_FAIL
    assert "inv-1.2.1: FAIL" in out and "Other fired at steps [2, 3]" in out
    assert "abstract model: c=1 + Other" in out


@pytest.mark.parametrize("argv", [
    ["check", G, "--n", "0"],
    ["check", "/nonexistent.m", "--n", "2"],
    ["check", G, "--n", "2", "--props", "NoSuchProp"],
    ["check", G, "--n", "2", "--workers", "zero"],
    ["frobnicate"],
    [],
])
def test_usage_exit_code(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_parse_error_is_reported(capsys, tmp_path):
    bad = tmp_path / "bad.m"
    bad.write_text("var x : boolean;\nrule \"R\" x = ==> end;\n")
    code, _, err = run(capsys, "check", str(bad), "--n", "1")
    assert code == EXIT_USAGE and "error: 2:" in err


def test_budget_exit_code(capsys):
    assert run(capsys, "check", G, "--n", "3", "--budget", "64k")[0] == EXIT_BUDGET


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "flowlock.cli", "check", G, "--n", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "CtrlProp: PASS" in r.stdout
