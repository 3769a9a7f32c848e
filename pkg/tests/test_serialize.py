import json

import numpy as np
import pytest

from opsyskit import serialize
from opsyskit.constructions import coproduct, pair_algebra
from opsyskit.errors import DependentBasis, SchemaError, VersionMismatch
from opsyskit.opsys import CpMap, ell_inf, make_system, matrix_algebra
from opsyskit.tensor import dmax_check, kirchberg_certify, max_witness, random_min_positive


def test_identity_record_shape():
    rec = serialize.to_record(np.eye(2))
    assert rec["type"] == "matrix"
    assert rec["version"] == serialize.SCHEMA_VERSION
    assert rec["payload"] == {"dim": 2, "rows": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]}
    assert np.array_equal(serialize.from_record(rec), np.eye(2))


def test_matrix_round_trip_exact(rng):
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.array_equal(serialize.loads(serialize.dumps(m)), m)
    r = rng.standard_normal((2, 3))
    assert np.array_equal(serialize.loads(serialize.dumps(r)), r)


def test_system_and_map_round_trip():
    s = make_system([1, 1], [np.eye(2), np.diag([1.0, -1.0])], name="l2")
    back = serialize.loads(serialize.dumps(s))
    assert back.blocks == s.blocks and back.name == "l2"
    assert all(np.array_equal(a, b) for a, b in zip(back.basis, s.basis))
    m = matrix_algebra(2)
    phi = CpMap(m, m, tuple(b.T for b in m.basis), "transpose")
    back = serialize.loads(serialize.dumps(phi))
    assert all(np.array_equal(a, b) for a, b in zip(back.values, phi.values))


def test_certificate_round_trip(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(2)])
    z = random_min_positive(cs, 2, rng)
    cert = kirchberg_certify(cs, 2, z).certificate
    text = serialize.dumps(cert)
    back = serialize.loads(text)
    assert serialize.dumps(back) == text
    z2 = serialize.loads(serialize.dumps(z))
    a, b = dmax_check(cert, z), dmax_check(back, z2)
    assert a.ok and b.ok
    assert (a.residual, a.delta) == (b.residual, b.delta)


def test_witness_round_trip(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    z = random_min_positive(cs, 2, rng, margin=-0.2)
    w = max_witness(z)
    back = serialize.loads(serialize.dumps(w))
    assert back.evaluate(z) == w.evaluate(z)


def test_truncated_input():
    text = serialize.dumps(ell_inf(2))
    with pytest.raises(SchemaError, match="line 1, column"):
        serialize.loads(text[: len(text) // 2])


def test_version_mismatch():
    rec = serialize.to_record(np.eye(1))
    rec["version"] = 2
    with pytest.raises(VersionMismatch):
        serialize.from_record(rec)


def test_strict_schema():
    rec = serialize.to_record(np.eye(2))
    rec["payload"]["extra"] = 1
    with pytest.raises(SchemaError, match="extra"):
        serialize.from_record(rec)
    rec = serialize.to_record(np.eye(2))
    rec["payload"]["rows"][0][0] = [1.0]
    with pytest.raises(SchemaError):
        serialize.from_record(rec)
    rec = serialize.to_record(np.eye(2))
    rec["payload"]["dim"] = 3
    with pytest.raises(SchemaError):
        serialize.from_record(rec)
    with pytest.raises(SchemaError):
        serialize.from_record({"format": "opsyskit", "version": 1, "type": "nope", "payload": {}})
    with pytest.raises(SchemaError):
        serialize.from_record([1, 2])


def test_invalid_system_is_rejected():
    rec = serialize.to_record(ell_inf(2))
    rec["payload"]["basis"][1] = rec["payload"]["basis"][0]
    with pytest.raises(DependentBasis):
        serialize.from_record(json.loads(json.dumps(rec)))
