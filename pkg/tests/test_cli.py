import json

import pytest

from iml.cli import main

from conftest import fixture_path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_monodromy_scalar(capsys):
    code, rep = report(capsys, "monodromy", fixture_path("scalar_r1n2"))
    assert code == 0
    for M in rep["monodromy"]["matrices"]:
        re, im = M[0][0]
        assert abs(re + 1) < 1e-10 and abs(im) < 1e-10


def test_monodromy_abelian(capsys):
    code, rep = report(capsys, "monodromy", fixture_path("abelian_r3n4"))
    assert code == 0 and rep["monodromy"]["relation_residual"] < 1e-9


def test_malformed_residue_exit_2(tmp_path, capsys):
    d = json.loads(open(fixture_path("r2n4"), encoding="utf-8").read())
    d["residues"][0] = [[[1, 0]]]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d), encoding="utf-8")
    code, _, err = run(capsys, "monodromy", str(p))
    assert code == 2 and "invalid input" in err


def test_stability_reports(capsys):
    code, rep = report(capsys, "stability", fixture_path("split_r2n4"))
    assert code == 0
    a, b = rep["weights"]["alpha_A"], rep["weights"]["alpha_B"]
    assert a["verdict"] == "unstable" and a["witness"]["lhs"] == "12/5" and a["witness"]["rhs"] == "39/20"
    assert b["verdict"] == "stable"
    _, rep = report(capsys, "stability", fixture_path("r2n4"))
    assert rep["weights"]["alpha"]["verdict"] == "stable"
    _, rep = report(capsys, "stability", fixture_path("r4n3"))
    assert rep["weights"]["alpha"]["verdict"] == "undecided"


def test_stability_needs_weights(capsys):
    code, _, _ = run(capsys, "stability", fixture_path("r2n5"))
    assert code == 2


def test_transform_round_trip(capsys):
    code, rep = report(capsys, "transform", fixture_path("split_r2n4"), "--script", "elm i=1 j=1; elm inverse")
    assert code == 0
    assert rep["lambda_after"] == [["-1/3", "1/5"], ["1/6", "3/10"], ["-1/4", "1/10"], ["-1/4", "1/15"]]
    assert rep["degree"] == {"before": 0, "after": 0}


def test_transform_empty_script(capsys):
    code, rep = report(capsys, "transform", fixture_path("split_r2n4"), "--script", "")
    assert code == 0 and rep["log"] == [] and rep["invariant_deviation"] == 0


def test_transform_normalize_large_parts(tmp_path, capsys):
    d = json.loads(open(fixture_path("split_r2n4"), encoding="utf-8").read())
    d["lambda"] = [["-1/3", "1/5"], ["1/6", "3/10"], ["-1/4", "1/10"], ["-1/4", "1/15"]]
    shifted = dict(d)
    p = tmp_path / "s.json"
    p.write_text(json.dumps(shifted), encoding="utf-8")
    # push the exponents far from the strip with twists first
    code, rep = report(capsys, "transform", str(p), "--script",
                       "twist i=1 dir=-1; twist i=1 dir=-1; twist i=2 dir=1; twist i=3 dir=1; normalize")
    assert code == 0
    from fractions import Fraction
    for row in rep["lambda_after"]:
        for x in row:
            assert 0 <= Fraction(x) < 1


def test_transform_bad_directive(capsys):
    code, _, _ = run(capsys, "transform", fixture_path("r2n4"), "--script", "spin i=1")
    assert code == 2
    code, _, _ = run(capsys, "transform", fixture_path("r2n4"), "--script", "elm inverse")
    assert code == 2


def test_flow_commuting_zero_drift(capsys):
    code, rep = report(capsys, "flow", fixture_path("abelian_r3n4"))
    assert code == 0
    assert rep["conservation"] == {"sum_drift": 0.0, "spectrum_drift": 0.0}


def test_flow_fixture(capsys):
    code, rep = report(capsys, "flow", fixture_path("r2n4"))
    assert code == 0 and rep["invariant_deviation"] <= 1e-6


def test_flow_collision_exit_2(capsys):
    code, _, err = run(capsys, "flow", fixture_path("r2n4_collision"))
    assert code == 2 and "ConfigurationCollision" in err


def test_flow_regularized(capsys):
    code, rep = report(capsys, "flow", fixture_path("near_blowup"))
    assert code == 0 and rep["mode"] == "horizontal_lift" and len(rep["moves"]) >= 1


def test_flow_needs_path(capsys):
    assert run(capsys, "flow", fixture_path("r2n5"))[0] == 2


def test_verify_fixture(capsys):
    code, rep = report(capsys, "verify", fixture_path("r2n4"))
    assert code == 0 and rep["moduli_dimension"] == 2 and rep["warnings"] == []
    assert all(c["passed"] for c in rep["checks"])


def test_verify_corrupted_lambda_exit_4(capsys):
    code, rep = report(capsys, "verify", fixture_path("r2n4_corrupted_lambda"))
    assert code == 4
    rh = next(c for c in rep["checks"] if c["name"] == "rh_consistency")
    assert not rh["passed"]


def test_verify_warning_attached(capsys):
    code, rep = report(capsys, "verify", fixture_path("r2n3"))
    assert code == 0 and rep["moduli_dimension"] == 0
    assert rep["warnings"] and "rn - 2r - 2" in rep["warnings"][0]


def test_reports_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["monodromy", fixture_path("r2n4"), "--out", str(a)]) == 0
    assert main(["monodromy", fixture_path("r2n4"), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_tol_and_seed_flags(capsys):
    code, _ = report(capsys, "monodromy", fixture_path("r2n4"), "--tol", "1e-30")
    assert code == 4
    assert run(capsys, "monodromy", fixture_path("r2n4"), "--tol", "-1")[0] == 2
    _, a = report(capsys, "verify", fixture_path("r2n4"), "--seed", "5")
    assert a["passed"]


def test_missing_file(capsys):
    assert run(capsys, "verify", "/nonexistent.json")[0] == 2


def test_entry_point_usage():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
