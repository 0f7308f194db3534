import json

import pytest

from condsym.cli import main

from .conftest import PROBLEMS


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_classify_boussinesq(capsys):
    code, out, _ = run(capsys, "classify", PROBLEMS / "boussinesq.prob", "--field", "F1", "--format", "structured")
    tree = json.loads(out)
    assert code == 0
    assert tree["verdict"] == "weak-cs-candidate" and tree["sigma"] == 3


def test_classify_heat_multiplier(capsys):
    code, out, _ = run(capsys, "classify", PROBLEMS / "heat.prob", "--field", "Fh", "--format", "structured")
    assert code == 0 and json.loads(out)["multiplier"] == "-x"


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "classify", tmp_path / "missing.prob")
    assert code == 1 and "file not found" in err


def test_field_required_when_several(capsys):
    code, _, err = run(capsys, "classify", PROBLEMS / "boussinesq.prob")
    assert code == 1 and "--field" in err


def test_parse_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.prob"
    bad.write_text("problem p\n independents x, t\n dependents u\n equation e: u_t + = 0\n")
    code, _, err = run(capsys, "classify", bad)
    assert code == 1 and "line 4" in err


def test_undetermined_exit(capsys):
    code, out, _ = run(capsys, "classify", PROBLEMS / "shifted.prob", "--sigma-max", "1")
    assert code == 2 and "undetermined" in out


def test_reduce_boussinesq(capsys):
    code, out, _ = run(capsys, "reduce", PROBLEMS / "boussinesq.prob", "--field", "F1", "--format", "structured")
    tree = json.loads(out)
    assert code == 0
    assert tree["multiplier"] == ["s^4"]
    assert len(tree["reduced_system"]) == 3


def test_reduce_shifted(capsys):
    code, out, _ = run(capsys, "reduce", PROBLEMS / "shifted.prob", "--format", "structured")
    assert json.loads(out)["reduced_system"] == ["w_xx - w", "w_x - w"]


def test_reduce_heat_translation(capsys):
    code, out, _ = run(capsys, "reduce", PROBLEMS / "heat.prob", "--field", "Fx")
    assert code == 0 and "w_t = 0" in out


def test_reduce_without_coordinates(capsys, tmp_path):
    p = tmp_path / "rot.prob"
    p.write_text("problem r\n independents x, t\n dependents u\n equation e: u_t = 0\n field R: xi_x = t; xi_t = x\n")
    code, _, err = run(capsys, "reduce", p)
    assert code == 1 and "coordinates for R" in err


def test_verify_elementary_solution(capsys):
    code, out, _ = run(capsys, "verify", PROBLEMS / "boussinesq.prob", "--solution", "S_elem")
    assert code == 0 and "S_elem  equations: pass" in out


def test_verify_certifies_kdv_family(capsys):
    code, out, _ = run(
        capsys, "verify", PROBLEMS / "kdv.prob", "--solution", "family", "--certify", "--field", "scaling",
        "--format", "structured",
    )
    tree = json.loads(out)
    assert code == 0
    assert tree["reports"][0]["verdict"] == "partial-symmetry-certified"


def test_verify_inline_solution(capsys):
    code, out, _ = run(capsys, "verify", PROBLEMS / "heat.prob", "--solution", "u=1")
    assert code == 0 and "pass" in out


def test_chain_command(capsys):
    code, out, _ = run(capsys, "chain", PROBLEMS / "kdv.prob")
    assert code == 0 and "-5*u_xxx" in out


def test_structured_output_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for target in (a, b):
        code, _, _ = run(capsys, "classify", PROBLEMS / "shifted.prob", "--certify", "--format", "structured", "--out", target)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["verdict"] == "weak-cs-certified"


def test_depth_is_echoed(capsys):
    code, out, _ = run(capsys, "classify", PROBLEMS / "kdv.prob", "--depth", "2", "--format", "structured")
    assert json.loads(out)["depth"] == 2


def test_bad_sigma_max(capsys):
    code, _, err = run(capsys, "classify", PROBLEMS / "kdv.prob", "--sigma-max", "0")
    assert code == 1
