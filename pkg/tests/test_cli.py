import json
from pathlib import Path

import numpy as np
import pytest

import opsyskit
from opsyskit import cli, serialize
from opsyskit.constructions import coproduct, pair_algebra
from opsyskit.opsys import matrix_algebra
from opsyskit.tensor import dmax_check, random_min_positive, tensor_element

SCENARIOS = Path(opsyskit.__file__).parent / "scenarios"


def run_main(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    return json.loads(out)["payload"]


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def scenario(tmp_path, command, **inputs):
    return write(tmp_path / "scenario.json", {"version": 1, "command": command, "seed": 0, "inputs": inputs})


def test_certify_shipped_example(capsys):
    code, out, _ = run_main(["--scenario", SCENARIOS / "certify_kirchberg.json"], capsys)
    assert code == 0
    rep = report(out)
    assert rep["exit_code"] == 0
    assert all(v["status"] == "verified" for v in rep["verdicts"])
    cert = next(c["record"] for c in rep["certificates"] if c["record"]["type"] == "max_certificate")
    z = serialize.loads((SCENARIOS / "two_block_element.json").read_text())
    assert dmax_check(serialize.from_record(cert), z).ok


def test_selftest_quick(capsys):
    code, out, _ = run_main(["--scenario", SCENARIOS / "selftest.json"], capsys)
    assert code == 0
    rep = report(out)
    assert len(rep["verdicts"]) == 10
    assert all(v["status"] == "verified" for v in rep["verdicts"])


def test_check_min_non_hermitian(tmp_path, capsys):
    m2 = matrix_algebra(2)
    rec = serialize.to_record(tensor_element(m2, m2, np.eye(4)))
    rec["payload"]["parts"][0]["rows"][0][1] = [1.0, 0.0]
    elem = write(tmp_path / "z.json", rec)
    code, out, err = run_main(["--scenario", scenario(tmp_path, "check-min", element=elem.name)], capsys)
    assert code == 1
    assert "SchemaError" in err and "not hermitian" in err
    assert out == ""


def test_refuted_and_unknown_exit_codes(tmp_path, capsys, rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    neg = random_min_positive(cs, 2, rng, margin=-0.2)
    pos = random_min_positive(cs, 2, rng, margin=0.2)
    write(tmp_path / "neg.json", serialize.to_record(neg))
    write(tmp_path / "pos.json", serialize.to_record(pos))
    code, out, _ = run_main(["--scenario", scenario(tmp_path, "check-max-witness", element="neg.json")], capsys)
    assert code == 2
    w = serialize.from_record(report(out)["certificates"][0]["record"])
    assert w.evaluate(neg) < 0
    code, _, _ = run_main(["--scenario", scenario(tmp_path, "check-max-witness", element="pos.json")], capsys)
    assert code == 3
    code, _, _ = run_main(["--scenario", scenario(tmp_path, "check-min", element="pos.json")], capsys)
    assert code == 0
    code, _, _ = run_main(["--scenario", scenario(tmp_path, "check-min", element="neg.json")], capsys)
    assert code == 2


def test_certify_refutes_negative_element(tmp_path, capsys, rng):
    cs = coproduct([pair_algebra(1), pair_algebra(2)])
    neg = random_min_positive(cs, 2, rng, margin=-0.1)
    write(tmp_path / "neg.json", serialize.to_record(neg))
    code, out, _ = run_main(["--scenario", scenario(tmp_path, "certify-kirchberg", element="neg.json")], capsys)
    assert code == 2
    assert any(c["record"]["type"] == "max_witness" for c in report(out)["certificates"])


def test_schema_errors(tmp_path, capsys):
    bad = write(tmp_path / "a.json", {"version": 1, "command": "demo-omax", "inputs": {"epsilon": 1}})
    code, _, err = run_main(["--scenario", bad], capsys)
    assert code == 1 and "epsilon" in err
    bad = write(tmp_path / "b.json", {"version": 1, "command": "demo-omax", "colour": "red"})
    assert run_main(["--scenario", bad], capsys)[0] == 1
    bad = write(tmp_path / "c.json", {"version": 9, "command": "demo-omax"})
    code, _, err = run_main(["--scenario", bad], capsys)
    assert code == 1 and "VersionMismatch" in err
    trunc = tmp_path / "d.json"
    trunc.write_text('{"version": 1, "command": "demo-o')
    code, _, err = run_main(["--scenario", trunc], capsys)
    assert code == 1 and "line 1, column" in err
    code, _, err = run_main(["--scenario", tmp_path / "missing.json"], capsys)
    assert code == 1
    code, _, err = run_main(["demo-omax", "--seed", str(2 ** 64)], capsys)
    assert code == 1


def test_determinism(capsys):
    outs = []
    for _ in range(2):
        code, out, _ = run_main(["--scenario", SCENARIOS / "demo_omax.json"], capsys)
        assert code == 0
        rep = report(out)
        rep.pop("timings")
        outs.append(json.dumps(rep, sort_keys=True))
    assert outs[0] == outs[1]


def test_flags_override_scenario(tmp_path, capsys):
    sc = write(tmp_path / "s.json", {"version": 1, "command": "nc-factorize", "tolerances": {"feas": 1e-7}})
    code, out, _ = run_main(["--scenario", sc, "--tol-feas", "1e-9", "--seed", "5"], capsys)
    assert code == 0
    rep = report(out)
    assert rep["config"]["tolerances"]["feas"] == 1e-9
    assert rep["config"]["seed"] == 5


def test_text_format_and_out_file(tmp_path, capsys):
    dest = tmp_path / "report.txt"
    code, out, _ = run_main(["build-coproduct", "--format", "text", "--out", dest], capsys)
    assert code == 0 and out == ""
    text = dest.read_text()
    assert "command=build-coproduct" in text and "exit code: 0" in text


@pytest.mark.parametrize("command", ["build-coproduct", "universal-quotient", "nc-factorize", "lift",
                                     "demo-omax", "certify-kirchberg"])
def test_commands_run_with_defaults(command, capsys):
    code, out, _ = run_main([command], capsys)
    assert code == 0
    assert report(out)["command"] == command


def test_quotient_check_shipped(capsys):
    code, out, _ = run_main(["--scenario", SCENARIOS / "quotient_check.json"], capsys)
    assert code == 0
    assert report(out)["verdicts"][0]["status"] == "verified"
