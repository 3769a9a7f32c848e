"""Versioned JSON records for systems, elements, maps and certificates.

Every file is an envelope ``{"format": "opsyskit", "version": 1, "type": ..., "payload": ...}``.
Complex numbers are ``[re, im]`` pairs, matrices are ``{"dim": n, "rows": [...]}``
in row-major order (``"dim": [r, c]`` when rectangular), and block profiles
are stored explicitly.  Floats are written with ``repr`` precision so every
round trip is exact.
"""
from __future__ import annotations

import json
from typing import Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .constructions.coproduct import CoproductElement, CoproductSystem, coproduct
from .errors import OpsysError, SchemaError, VersionMismatch
from .opsys.maps import CpMap
from .opsys.systems import ConcreteOperatorSystem, make_system
from .tensor.cones import MaxCertificate, MaxWitness, TensorElement

FORMAT = "opsyskit"
SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class MatrixRecord(_Strict):
    dim: Union[int, list[int]]
    rows: list[list[list[float]]]

    @model_validator(mode="after")
    def _shape(self):
        if isinstance(self.dim, int):
            r = c = self.dim
        elif len(self.dim) == 2:
            r, c = self.dim
        else:
            raise ValueError("dim must be an integer or a [rows, cols] pair")
        if r < 0 or c < 0:
            raise ValueError("dim must be nonnegative")
        if len(self.rows) != r or any(len(row) != c for row in self.rows):
            raise ValueError(f"rows do not match dim {self.dim}")
        if any(len(z) != 2 for row in self.rows for z in row):
            raise ValueError("complex entries must be [re, im] pairs")
        return self


class SystemRecord(_Strict):
    kind: Literal["concrete"] = "concrete"
    name: str = ""
    blocks: list[int]
    unit_index: int
    basis: list[MatrixRecord]


class CoproductRecord(_Strict):
    kind: Literal["coproduct"] = "coproduct"
    name: str = ""
    components: list[SystemRecord]


LeftRecord = Union[SystemRecord, CoproductRecord]


class TensorRecord(_Strict):
    left: LeftRecord = Field(discriminator="kind")
    right: SystemRecord
    level: int
    parts: list[MatrixRecord]


class CoproductElementRecord(_Strict):
    system: CoproductRecord
    level: int
    parts: list[MatrixRecord]


class CertificateRecord(_Strict):
    left: LeftRecord = Field(discriminator="kind")
    right: SystemRecord
    level: int
    k: int
    l: int
    alpha: MatrixRecord
    P: list[MatrixRecord]
    Q: MatrixRecord
    delta: float


class WitnessRecord(_Strict):
    left: LeftRecord = Field(discriminator="kind")
    right: SystemRecord
    level: int
    choi: list[list[MatrixRecord]]
    value: float


class MapRecord(_Strict):
    name: str = ""
    domain: SystemRecord
    codomain: SystemRecord
    values: list[MatrixRecord]


class Envelope(_Strict):
    format: Literal["opsyskit"]
    version: int
    type: str
    payload: Any


# --- matrices ------------------------------------------------------------------------------

def encode_matrix(m: np.ndarray) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    r, c = m.shape
    rows = [[[float(z.real), float(z.imag)] for z in row] for row in m]
    return {"dim": r if r == c else [r, c], "rows": rows}


def decode_matrix(rec: MatrixRecord | dict) -> np.ndarray:
    if isinstance(rec, dict):
        rec = MatrixRecord.model_validate(rec)
    if not rec.rows:
        return np.zeros((0, 0), dtype=complex)
    a = np.array(rec.rows, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


# --- systems -------------------------------------------------------------------------------

def encode_system(s: ConcreteOperatorSystem) -> dict:
    return {"kind": "concrete", "name": s.name, "blocks": list(s.blocks), "unit_index": s.unit_index,
            "basis": [encode_matrix(b) for b in s.basis]}


def decode_system(rec: SystemRecord) -> ConcreteOperatorSystem:
    unit = rec.unit_index if rec.unit_index >= 0 else None
    return make_system(rec.blocks, [decode_matrix(b) for b in rec.basis], unit, name=rec.name)


def encode_left(left) -> dict:
    if isinstance(left, CoproductSystem):
        return {"kind": "coproduct", "name": left.name, "components": [encode_system(c) for c in left.components]}
    return encode_system(left)


def decode_left(rec):
    if isinstance(rec, CoproductRecord):
        return coproduct([decode_system(c) for c in rec.components], name=rec.name)
    return decode_system(rec)


# --- objects -------------------------------------------------------------------------------

def _encode(obj) -> tuple[str, dict]:
    if isinstance(obj, np.ndarray):
        return "matrix", encode_matrix(obj)
    if isinstance(obj, ConcreteOperatorSystem):
        return "system", encode_system(obj)
    if isinstance(obj, CoproductSystem):
        return "coproduct", encode_left(obj)
    if isinstance(obj, CoproductElement):
        return "coproduct_element", {"system": encode_left(obj.system), "level": obj.level,
                                     "parts": [encode_matrix(p) for p in obj.parts]}
    if isinstance(obj, TensorElement):
        return "tensor", {"left": encode_left(obj.left), "right": encode_system(obj.right),
                          "level": obj.level, "parts": [encode_matrix(p) for p in obj.parts]}
    if isinstance(obj, MaxCertificate):
        return "max_certificate", {
            "left": encode_left(obj.left), "right": encode_system(obj.right), "level": obj.level,
            "k": obj.k, "l": obj.l, "alpha": encode_matrix(obj.alpha),
            "P": [encode_matrix(p) for p in obj.p_parts()], "Q": encode_matrix(obj.Q),
            "delta": float(obj.delta)}
    if isinstance(obj, MaxWitness):
        return "max_witness", {
            "left": encode_left(obj.left), "right": encode_system(obj.right), "level": obj.level,
            "choi": [[encode_matrix(c) for c in row] for row in obj.choi], "value": float(obj.value)}
    if isinstance(obj, CpMap):
        return "cp_map", {"name": obj.name, "domain": encode_system(obj.domain),
                          "codomain": encode_system(obj.codomain),
                          "values": [encode_matrix(v) for v in obj.values]}
    raise SchemaError(f"no record type for {type(obj).__name__}")


def _decode(kind: str, payload):
    if kind == "matrix":
        return decode_matrix(MatrixRecord.model_validate(payload))
    if kind == "system":
        return decode_system(SystemRecord.model_validate(payload))
    if kind == "coproduct":
        return decode_left(CoproductRecord.model_validate(payload))
    if kind == "coproduct_element":
        rec = CoproductElementRecord.model_validate(payload)
        cs = decode_left(rec.system)
        return cs.element([decode_matrix(p) for p in rec.parts], rec.level)
    if kind == "tensor":
        rec = TensorRecord.model_validate(payload)
        left = decode_left(rec.left)
        parts = [decode_matrix(p) for p in rec.parts]
        data = tuple(parts) if isinstance(left, CoproductSystem) else parts[0]
        return TensorElement(left, decode_system(rec.right), rec.level, data)
    if kind == "max_certificate":
        rec = CertificateRecord.model_validate(payload)
        left = decode_left(rec.left)
        parts = [decode_matrix(p) for p in rec.P]
        if isinstance(left, CoproductSystem):
            P = CoproductElement(left, rec.k, tuple(parts))
        else:
            P = parts[0]
        return MaxCertificate(left, decode_system(rec.right), rec.level, rec.k, rec.l,
                              decode_matrix(rec.alpha), P, decode_matrix(rec.Q), rec.delta)
    if kind == "max_witness":
        rec = WitnessRecord.model_validate(payload)
        return MaxWitness(decode_left(rec.left), decode_system(rec.right), rec.level,
                          [[decode_matrix(c) for c in row] for row in rec.choi], rec.value)
    if kind == "cp_map":
        rec = MapRecord.model_validate(payload)
        dom, cod = decode_system(rec.domain), decode_system(rec.codomain)
        return CpMap(dom, cod, tuple(decode_matrix(v) for v in rec.values), rec.name)
    raise SchemaError(f"unknown record type {kind!r}")


def to_record(obj) -> dict:
    kind, payload = _encode(obj)
    return {"format": FORMAT, "version": SCHEMA_VERSION, "type": kind, "payload": payload}


def from_record(data) -> Any:
    if not isinstance(data, dict):
        raise SchemaError("a record must be a JSON object")
    if "version" in data and data.get("version") != SCHEMA_VERSION:
        raise VersionMismatch(f"schema version {data.get('version')!r} is not supported "
                              f"(this build reads version {SCHEMA_VERSION})")
    try:
        env = Envelope.model_validate(data)
        return _decode(env.type, env.payload)
    except ValidationError as e:
        raise SchemaError(format_validation_error(e)) from None
    except OpsysError:
        raise
    except (ValueError, TypeError) as e:
        raise SchemaError(str(e)) from None


def format_validation_error(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"at {loc}: {err['msg']}")
    return "; ".join(lines)


def parse_json(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None


def dumps(obj, indent: int | None = None) -> str:
    return json.dumps(to_record(obj), indent=indent)


def loads(text: str, source: str = "<input>"):
    return from_record(parse_json(text, source))


def toolkit_version() -> str:
    return __version__
