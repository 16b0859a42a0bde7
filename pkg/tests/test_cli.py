import json
import shutil
import subprocess
import sys

import pytest

from finsleraudit import printed
from finsleraudit.audit import R0_CONVENTION, SCHEMA_VERSION
from finsleraudit.cli import bundled_scenario, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def default_json(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "report.json"
    code = main(["audit", "--format", "json", "--output", str(path)])
    return code, json.loads(path.read_text())


def test_audit_default_json(default_json):
    code, doc = default_json
    assert code == 3
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["conventions"]["r0"] == R0_CONVENTION
    assert doc["fixtures_verified"] is True
    assert doc["seed"] == 20240
    assert doc["summary"]["exit_code"] == 3 and doc["summary"]["FAIL"] == 0
    status = {r["id"]: r["status"] for r in doc["records"]}
    for rid in ("conformal.s0.printed", "conformal.s0u.printed", "conformal.Dstar.printed",
                "case.family.lead_coefficient"):
        assert status[rid] == "FINDING"
    for r in doc["records"]:
        assert set(r) >= {"id", "anchor", "status", "summary"}


def test_case_filter_text_and_json_agree(capsys, tmp_path):
    sc = str(bundled_scenario("warped"))
    code, text, _ = run(capsys, "audit", "--scenario", sc, "--case", "randers")
    # the scenario-independent typo findings keep the exit code at 3
    assert code == 3
    code_j, out, _ = run(capsys, "audit", "--scenario", sc, "--case", "randers", "--format", "json")
    doc = json.loads(out)
    assert code_j == code
    ids = [r["id"] for r in doc["records"]]
    assert "case.randers.K2" in ids
    assert next(r for r in doc["records"] if r["id"] == "case.randers.K2")["status"] == "PASS"
    text_ids = [ln.split()[1] for ln in text.splitlines() if ln.split()[:1] and ln.split()[0] in ("PASS", "FAIL", "FINDING")]
    assert text_ids == ids
    assert R0_CONVENTION in text


def test_missing_scenario(capsys, tmp_path):
    code, _, err = run(capsys, "audit", "--scenario", str(tmp_path / "nope.scn"))
    assert code == 2
    assert "nope.scn" in err


def test_invalid_scenario(capsys, tmp_path):
    p = tmp_path / "bad.scn"
    p.write_text('dim = 2\nmetric = [["1","1"],["0","1"]]\nb = ["1","0"]\nsigma = "0"\n'
                 'family = {"epsilon": "1", "k": "0"}\npoints = [["1","1"]]\n')
    code, _, err = run(capsys, "hpcheck", "--scenario", str(p), "y1", "-d", "1")
    assert code == 2 and "asymmetric" in err


@pytest.mark.parametrize("expr, d, code, graded, concrete", [
    ("y1*y2", 2, 0, "HP(2)", "HP(2)"),
    ("alpha", 1, 1, "HP(1)", "NotPolynomial"),
    ("r00 + s0", 2, 1, "NotHomogeneous", "NotHomogeneous"),
    ("sigma0*bi - beta*sigmai", 1, 0, "HP(1)", "HP(1)"),
])
def test_hpcheck(capsys, expr, d, code, graded, concrete):
    c, out, _ = run(capsys, "hpcheck", expr, "-d", str(d), "--format", "json")
    doc = json.loads(out)
    assert c == code == doc["exit_code"]
    assert doc["graded"]["verdict"] == graded
    assert doc["concrete"]["verdict"] == concrete


def test_hpcheck_input_errors(capsys):
    code, _, err = run(capsys, "hpcheck", "zeta + 1", "-d", "1")
    assert code == 2 and "zeta" in err
    code, _, err = run(capsys, "hpcheck", "1/0", "-d", "0")
    assert code == 2
    code, _, err = run(capsys, "hpcheck", "(y1", "-d", "1")
    assert code == 2 and "offset" in err


def test_hpcheck_text_shows_witness(capsys):
    code, out, _ = run(capsys, "hpcheck", "alpha", "-d", "1")
    assert code == 1
    assert "graded:     HP(1)" in out
    assert "concrete witness" in out and "alpha-odd part" in out


def test_derive(capsys):
    code, out, _ = run(capsys, "derive", "--case", "randers", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["quantities"]["Omega"] == "beta^2"
    assert doc["conventions"]["r0"] == R0_CONVENTION
    code, out, _ = run(capsys, "derive")
    assert code == 0 and out.startswith("case: family")


def test_unknown_flag_and_bad_case():
    for argv in (["audit", "--colour"], ["audit", "--case", "finsler"], ["frobnicate"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_selftest_seed_is_reproducible(capsys):
    code1, out1, _ = run(capsys, "selftest", "--seed", "7")
    code2, out2, _ = run(capsys, "selftest", "--seed", "7")
    assert code1 == code2 == 0
    assert out1 == out2
    assert out1.rstrip().endswith("selftest passed (seed 7)")
    assert "FAILED" not in out1


def test_selftest_names_corrupted_fixture(capsys, tmp_path):
    d = tmp_path / "fx"
    shutil.copytree(printed.default_dir(), d)
    f = d / printed.FIXTURE_FILE
    f.write_text(f.read_text().replace('family.L_alpha = "1 - k', 'family.L_alpha = "1 + k'))
    code, out, err = run(capsys, "selftest", "--fixtures", str(d))
    assert code == 1
    assert printed.FIXTURE_FILE in err


def test_console_entry_point():
    p = subprocess.run([sys.executable, "-m", "finsleraudit", "hpcheck", "y1*y2", "-d", "2"],
                       capture_output=True, text=True)
    assert p.returncode == 0
    assert "HP(2)" in p.stdout
    p = subprocess.run([sys.executable, "-m", "finsleraudit", "audit", "--bogus"], capture_output=True, text=True)
    assert p.returncode == 2 and "--bogus" in p.stderr
