from __future__ import annotations

import json

import pytest

from twistedk.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, fmt_float, main
from twistedk.fileformat import dumps, save, to_document
from twistedk.scenarios import Su2Scenario, TripleParams, build_su2, build_synthetic_triple


def run_json(capsys, *argv):
    code = main([*argv, "--report", "json"])
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


@pytest.fixture(scope="module")
def su2_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "su2.json"
    save(build_su2(Su2Scenario(3)), path)
    return path


@pytest.fixture(scope="module")
def triple_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "triple.json"
    save(build_synthetic_triple(TripleParams(matrix_rank=0)), path)
    return path


def test_su2_reports_eta0(capsys):
    code, rep = run_json(capsys, "su2", "--k", "3", "--j", "0")
    assert code == EXIT_OK
    assert rep["values"]["eta0_integral"] == pytest.approx(2 / 3, abs=1e-6)
    assert list(rep) == ["command", "passed", "checks", "values"]


def test_lie_bound(capsys):
    code, rep = run_json(capsys, "lie", "--series", "A", "--rank", "2", "--k", "4")
    assert code == EXIT_OK
    assert rep["values"]["bound"] == 2
    assert all(c["passed"] for c in rep["checks"])


def test_lie_rejects_other_series(capsys):
    assert main(["lie", "--series", "B", "--rank", "2", "--k", "4"]) == EXIT_INPUT


def test_perturbed_b_exits_one(tmp_path, capsys):
    doc = to_document(build_su2(Su2Scenario(3)))
    doc["deligne"]["B"][1]["form"]["theta^u"] = "0.01"
    path = tmp_path / "bad.json"
    path.write_text(dumps(doc))
    code, rep = run_json(capsys, "check-deligne", str(path))
    assert code == EXIT_FAIL
    (check,) = rep["checks"]
    assert check["residuals"]["condition3"] > 1e-3


@pytest.mark.parametrize("command", ["check-deligne", "check-cocycle", "theta", "eta0"])
def test_file_commands_pass(command, su2_file, capsys):
    code, rep = run_json(capsys, command, str(su2_file))
    assert code == EXIT_OK, rep


@pytest.mark.parametrize("kind", ["partition", "cut", "homotopy"])
def test_corrections(kind, triple_file, capsys):
    code, _ = run_json(capsys, "corrections", str(triple_file), "--kind", kind)
    assert code == EXIT_OK


def test_check_matrix_without_section(triple_file, capsys):
    assert main(["check-matrix", str(triple_file)]) == EXIT_INPUT


def test_eta0_without_level(triple_file, capsys):
    assert main(["eta0", str(triple_file)]) == EXIT_INPUT


def test_input_errors(tmp_path, capsys):
    assert main(["theta", str(tmp_path / "missing.json")]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": 1}')
    assert main(["theta", str(bad)]) == EXIT_INPUT
    doc = to_document(build_su2(Su2Scenario(3)))
    doc["partition"][1] = "ramp(theta"
    bad.write_text(dumps(doc))
    assert main(["theta", str(bad)]) == EXIT_INPUT
    assert main(["su2", "--k", "3", "--j", "1"]) == EXIT_INPUT


def test_report_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["su2", "--k", "4", "--j", "1/2", "--report", "json", "--out", str(a)]) == EXIT_OK
    assert main(["su2", "--k", "4", "--j", "1/2", "--report", "json", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_tol_override_applies_everywhere(capsys):
    code, rep = run_json(capsys, "rr-sphere", "--m", "2", "--tol", "0")
    assert code == EXIT_FAIL
    assert rep["checks"][0]["tolerance"] == 0.0


def test_rr_sphere(capsys):
    code, rep = run_json(capsys, "rr-sphere", "--m", "-2")
    assert code == EXIT_OK
    assert rep["values"]["integral"] == pytest.approx(-1.0, abs=1e-9)


def test_emit_and_reload(tmp_path, capsys):
    path = tmp_path / "emitted.json"
    assert main(["su2", "--k", "5", "--j", "1", "--no-separate", "--emit", str(path)]) == EXIT_OK
    capsys.readouterr()
    code, rep = run_json(capsys, "eta0", str(path))
    assert code == EXIT_OK
    assert rep["values"]["eta0_integral"] is not None


def test_text_report(capsys):
    assert main(["lie", "--rank", "1", "--k", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("lie: PASS")


def test_float_formatting():
    assert fmt_float(1 / 3) == 0.333333333333
    assert fmt_float(float("inf")) == "inf"
    assert fmt_float(float("nan")) == "nan"
