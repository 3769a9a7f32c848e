"""Command-line driver.

A run is described by a scenario (a JSON file or just a command name plus
flags) and produces a versioned JSON report.  Exit codes: 0 when every
verdict is verified, 2 when a refutation is present, 3 when any verdict is
Unknown, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__, serialize
from .config import DEFAULT, Tolerances
from .constructions import (check_package, coproduct, dual_coproduct, pair_algebra, perturbed_lift,
                            quotient_map_check, random_lift_instance, universal_quotient)
from .constructions.coproduct import CoproductSystem
from .errors import InvalidInput, OpsysError, SchemaError
from .numerics.linalg import Status
from .omax_demo import no_lift_proof, omax_lift, random_target
from .opsys.maps import CpMap, CpStatus, cp_check
from .opsys.systems import ConcreteOperatorSystem, ell_inf, full_algebra, matrix_algebra
from .tensor import (MaxCertificate, TensorElement, dmax_check, kirchberg_certify, max_witness,
                     min_membership, nc_factorization, random_min_positive)

COMMANDS = ("check-min", "check-max-witness", "certify-kirchberg", "build-coproduct", "quotient-check",
            "universal-quotient", "lift", "nc-factorize", "demo-omax", "selftest")

VERIFIED, REFUTED, UNKNOWN = "verified", "refuted", "unknown"

Ref = Union[str, dict]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TolOverrides(_Strict):
    feas: Optional[float] = None
    eig: Optional[float] = None
    gap: Optional[float] = None
    cert: Optional[float] = None
    cond_floor: Optional[float] = None
    size_cap: Optional[int] = None


class ElementInputs(_Strict):
    element: Ref
    eps: float = 0.0


class KirchbergInputs(_Strict):
    element: Optional[Ref] = None
    components: list[int] = [1, 2]
    d: int = 2
    count: int = Field(1, ge=1)
    margin: float = 0.1


class CoproductInputs(_Strict):
    components: list[list[int]] = [[1, 1], [2, 2]]


class QuotientInputs(_Strict):
    map: Ref
    levels: list[int] = [1, 2]
    eps: float = 1e-6
    samples: int = 8


class GeneratorInput(_Strict):
    level: int
    matrix: Ref


class UniversalInputs(_Strict):
    target: Union[Literal["linf2", "linf3", "M2"], dict] = "M2"
    generators: Optional[list[GeneratorInput]] = None


class LiftInputs(_Strict):
    count: int = Field(1, ge=1)
    eps: float = 0.01
    blocks: list[int] = [2, 3]


class NcInputs(_Strict):
    extra: list[int] = []


class OmaxInputs(_Strict):
    eps: float = 0.05
    count: int = Field(5, ge=0)
    levels: list[int] = [1, 2]
    v_norms: list[float] = [1.0, 0.5, 0.001]


class SelftestInputs(_Strict):
    scale: Literal["quick", "full"] = "quick"


INPUT_MODELS = {
    "check-min": ElementInputs, "check-max-witness": ElementInputs, "certify-kirchberg": KirchbergInputs,
    "build-coproduct": CoproductInputs, "quotient-check": QuotientInputs,
    "universal-quotient": UniversalInputs, "lift": LiftInputs, "nc-factorize": NcInputs,
    "demo-omax": OmaxInputs, "selftest": SelftestInputs,
}


class Scenario(_Strict):
    version: int = serialize.SCHEMA_VERSION
    command: Literal[COMMANDS]
    seed: int = Field(0, ge=0, lt=2 ** 64)
    tolerances: Optional[TolOverrides] = None
    inputs: dict[str, Any] = {}


# --- report -----------------------------------------------------------------------------

class Report:
    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.verdicts: list[dict] = []
        self.certificates: list[dict] = []
        self.stats: dict = {}
        self.timings: dict = {}

    def verdict(self, name: str, status: str, **detail):
        self.verdicts.append({"name": name, "status": status, "detail": _plain(detail)})

    def certificate(self, name: str, obj):
        rec = obj if isinstance(obj, dict) else serialize.to_record(obj)
        self.certificates.append({"name": name, "record": rec})

    def exit_code(self) -> int:
        statuses = {v["status"] for v in self.verdicts}
        if UNKNOWN in statuses:
            return 3
        if REFUTED in statuses:
            return 2
        return 0

    def to_dict(self) -> dict:
        return {"format": serialize.FORMAT, "version": serialize.SCHEMA_VERSION, "type": "report",
                "payload": {"command": self.command, "toolkit_version": __version__,
                            "config": self.config, "exit_code": self.exit_code(),
                            "verdicts": self.verdicts, "certificates": self.certificates,
                            "solver_stats": _plain(self.stats), "timings": self.timings}}

    def to_text(self) -> str:
        lines = [f"opsyskit {__version__}  command={self.command}  seed={self.config['seed']}"]
        for v in self.verdicts:
            detail = ", ".join(f"{k}={_short(x)}" for k, x in v["detail"].items())
            lines.append(f"  {v['status']:<9} {v['name']}" + (f"  ({detail})" if detail else ""))
        lines.append(f"  certificates: {len(self.certificates)}  exit code: {self.exit_code()}")
        return "\n".join(lines)


def _short(x) -> str:
    if isinstance(x, float):
        return f"{x:.4g}"
    if isinstance(x, list) and len(x) > 4:
        return f"[{len(x)} items]"
    return str(x)


def _plain(obj):
    """Numpy scalars and arrays to JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return serialize.encode_matrix(obj)
    if isinstance(obj, (str, int)) or obj is None:
        return obj
    return str(obj)


# --- inputs -----------------------------------------------------------------------------

class Context:
    def __init__(self, scenario: Scenario, base: Path, tols: Tolerances):
        self.scenario = scenario
        self.base = base
        self.tols = tols
        self.rng = np.random.default_rng(scenario.seed)

    def load(self, ref: Ref, what: type, label: str):
        if isinstance(ref, str):
            path = (self.base / ref) if not Path(ref).is_absolute() else Path(ref)
            try:
                text = path.read_text()
            except OSError as e:
                raise SchemaError(f"{label}: cannot read {path}: {e.strerror}") from None
            obj = serialize.loads(text, source=str(path))
        else:
            obj = serialize.from_record(ref)
        if not isinstance(obj, what):
            raise SchemaError(f"{label}: expected a {what.__name__} record, got {type(obj).__name__}")
        return obj


def _hermitian_parts(z: TensorElement, label: str):
    for i, p in enumerate(z.parts):
        if np.abs(p - p.conj().T).max() > 1e-12 * max(1.0, float(np.abs(p).max())):
            raise SchemaError(f"{label}: part {i} is not hermitian")


def _stats_of(info) -> dict:
    return info.get("stats", {}) if isinstance(info, dict) else {}


# --- commands -----------------------------------------------------------------------------

def cmd_check_min(ctx: Context, inp: ElementInputs, rep: Report):
    z = ctx.load(inp.element, TensorElement, "inputs.element")
    _hermitian_parts(z, "inputs.element")
    v = min_membership(z, inp.eps, ctx.tols)
    status = {Status.MEMBER: VERIFIED, Status.NON_MEMBER: REFUTED, Status.UNKNOWN: UNKNOWN}[v.status]
    rep.verdict("min-cone membership", status, margin=v.margin, eps=inp.eps)
    if v.certificate is not None:
        for i, m in enumerate(v.certificate if isinstance(v.certificate, list) else [v.certificate]):
            rep.certificate(f"shift[{i}]", np.asarray(m))
    if v.witness is not None:
        for i, m in enumerate(v.witness if isinstance(v.witness, list) else [v.witness]):
            rep.certificate(f"state[{i}]", np.asarray(m))
    rep.stats["membership"] = _stats_of(v.info)


def cmd_check_max_witness(ctx: Context, inp: ElementInputs, rep: Report):
    z = ctx.load(inp.element, TensorElement, "inputs.element")
    _hermitian_parts(z, "inputs.element")
    w = max_witness(z, inp.eps, ctx.tols)
    if w is None:
        rep.verdict("max-cone witness", UNKNOWN, reason="no verified witness; not a membership claim")
        return
    rep.verdict("max-cone witness", REFUTED, value=w.value, eps=inp.eps)
    rep.certificate("witness", w)


def _certify_one(ctx: Context, rep: Report, name: str, cs: CoproductSystem, d: int, z: TensorElement):
    mv = min_membership(z, 0.0, ctx.tols)
    rep.stats[name] = _stats_of(mv.info)
    if mv.status is Status.NON_MEMBER:
        w = max_witness(z, 0.0, ctx.tols)
        rep.verdict(name, REFUTED if w is not None else UNKNOWN, reason="element is not min-positive",
                    margin=mv.margin)
        if w is not None:
            rep.certificate(f"{name}/witness", w)
        return
    res = kirchberg_certify(cs, d, z, tols=ctx.tols)
    # the emitted record must re-verify after a round trip
    text = serialize.dumps(res.certificate)
    again = serialize.loads(text)
    check = dmax_check(again, z, ctx.tols, delta_tol=1e-6)
    rep.verdict(name, VERIFIED if check.ok else UNKNOWN, residual=check.residual, delta=check.delta,
                min_margin=res.min_margin, reverified=bool(check.ok))
    rep.certificate(f"{name}/certificate", json.loads(text))


def cmd_certify_kirchberg(ctx: Context, inp: KirchbergInputs, rep: Report):
    if inp.element is not None:
        z = ctx.load(inp.element, TensorElement, "inputs.element")
        _hermitian_parts(z, "inputs.element")
        if not isinstance(z.left, CoproductSystem):
            raise SchemaError("inputs.element: the left factor must be a coproduct")
        _certify_one(ctx, rep, "instance[0]", z.left, z.right.amb, z)
        return
    cs = coproduct([pair_algebra(k) for k in inp.components])
    for i in range(inp.count):
        z = random_min_positive(cs, inp.d, ctx.rng, inp.margin, tols=ctx.tols)
        _certify_one(ctx, rep, f"instance[{i}]", cs, inp.d, z)


def cmd_build_coproduct(ctx: Context, inp: CoproductInputs, rep: Report):
    if len(inp.components) < 1:
        raise SchemaError("inputs.components: need at least one component")
    cs = coproduct([full_algebra(b) for b in inp.components])
    pkg = dual_coproduct(cs)
    chk = check_package(pkg, tols=ctx.tols)
    worst = max(float(v) for v in chk.values())
    rep.verdict("dual package identities", VERIFIED if worst <= 1e-9 else UNKNOWN,
                dim=cs.dim, components=cs.size, **chk)
    rep.certificate("coproduct", cs)


def cmd_quotient_check(ctx: Context, inp: QuotientInputs, rep: Report):
    phi = ctx.load(inp.map, CpMap, "inputs.map")
    r = quotient_map_check(phi, inp.levels, inp.eps, ctx.tols, inp.samples, ctx.scenario.seed)
    status = {"Verified": VERIFIED, "Failed": REFUTED, "Unknown": UNKNOWN}[r.status.value]
    rep.verdict("complete order quotient", status, exact=r.exact, level=r.level, lifts=len(r.lifts),
                **{k: v for k, v in r.info.items() if k != "stats"})
    if r.refutation is not None:
        rep.certificate("annihilating state", r.refutation)
        rep.certificate("target", r.target)


def _target_system(t) -> ConcreteOperatorSystem:
    if isinstance(t, str):
        return {"linf2": ell_inf(2), "linf3": ell_inf(3), "M2": matrix_algebra(2)}[t]
    obj = serialize.from_record(t)
    if not isinstance(obj, ConcreteOperatorSystem):
        raise SchemaError("inputs.target: expected a system record")
    return obj


def cmd_universal_quotient(ctx: Context, inp: UniversalInputs, rep: Report):
    target = _target_system(inp.target)
    if inp.generators is None:
        from .suites import _positive_contraction, _project_level
        gens = []
        for k in (1, 2):
            x = _project_level(_positive_contraction(ctx.rng, k * target.amb), k, target)
            gens.append((k, x / np.linalg.eigvalsh(x)[-1] * ctx.rng.uniform(0.3, 1.0)))
    else:
        gens = [(g.level, ctx.load(g.matrix, np.ndarray, f"inputs.generators[{i}]"))
                for i, g in enumerate(inp.generators)]
    uq = universal_quotient(target, gens, ctx.tols)
    chk = uq.phi.check(ctx.tols)
    rep.verdict("Phi unital CP", VERIFIED if chk["unital"] and chk["cp"] else UNKNOWN,
                unital=chk["unital"], cp=chk["cp"])
    for i, (k, x) in enumerate(gens):
        lift = uq.lift(i)
        err = float(np.abs(uq.phi.apply(lift) - x).max())
        norm = float(np.linalg.norm(lift.parts[i], 2))
        bound = k * k * uq.norms[i]
        ok = err <= 1e-12 and abs(norm - bound) <= 1e-12 * max(1.0, bound)
        rep.verdict(f"lift[{i}]", VERIFIED if ok else UNKNOWN, level=k, image_error=err,
                    lift_norm=norm, bound=bound)
        rep.certificate(f"lift[{i}]", lift)


def cmd_lift(ctx: Context, inp: LiftInputs, rep: Report):
    for i in range(inp.count):
        inst = random_lift_instance(ctx.rng, tuple(inp.blocks))
        res = perturbed_lift(inst.phi, inst.q, inst.density, inp.eps, ctx.tols)
        if res is None:
            rep.verdict(f"instance[{i}]", UNKNOWN, reason="no certified Choi lift")
            continue
        status = {CpStatus.CP: VERIFIED, CpStatus.NOT_CP: REFUTED, CpStatus.UNKNOWN: UNKNOWN}[res.verdict.status]
        rep.verdict(f"instance[{i}]", status, eps=inp.eps, smallest_density_eig=res.lam,
                    margin=res.verdict.margin)
        rep.certificate(f"instance[{i}]/lift", res.lift)


def cmd_nc_factorize(ctx: Context, inp: NcInputs, rep: Report):
    cs = coproduct([pair_algebra(2), pair_algebra(3)] + [pair_algebra(k) for k in inp.extra])
    nf = nc_factorization(cs)
    defect = nf.roundtrip_defect()
    rep.verdict("Psi∘Phi = id", VERIFIED if defect <= 1e-12 else UNKNOWN, defect=defect)
    for name, f in (("Phi", nf.phi), ("Psi", nf.psi)):
        chk = f.check(ctx.tols)
        rep.verdict(f"{name} unital CP", VERIFIED if chk["unital"] and chk["cp"] else UNKNOWN,
                    unital=chk["unital"], cp=chk["cp"])


def cmd_demo_omax(ctx: Context, inp: OmaxInputs, rep: Report):
    for i in range(inp.count):
        n = inp.levels[i % len(inp.levels)]
        a1, a2 = random_target(ctx.rng, n)
        lift = omax_lift(a1, a2, inp.eps)
        rep.verdict(f"lift[{i}]", VERIFIED if lift.audit_ok else REFUTED, level=n,
                    projection_defect=lift.projection_defect,
                    vectors=[list(t.vector) for t in lift.terms], notes=lift.notes)
    for v in inp.v_norms:
        rec = no_lift_proof(v)
        rep.verdict(f"no positive lift of (0, {v})", VERIFIED if rec.impossible else UNKNOWN,
                    steps=rec.steps, gap=rec.gap)


def cmd_selftest(ctx: Context, inp: SelftestInputs, rep: Report):
    from . import suites
    quick = inp.scale == "quick"
    seed = ctx.scenario.seed
    keep: list = []
    kconf = [((1, 1), 2), ((1, 2), 2), ((2, 2, 2), 2)] if quick else None
    runs = [
        lambda: suites.matrix_pair_suite(seed, 10 if quick else 200),
        lambda: suites.coproduct_duality_suite(seed, 10 if quick else 100, ctx.tols),
        lambda: suites.universal_quotient_suite(seed, 1 if quick else 3),
        lambda: suites.padding_suite(),
        lambda: suites.kirchberg_suite(seed, 1 if quick else 20, configs=kconf, keep=keep),
        lambda: suites.witness_soundness_suite(keep, seed, 3 if quick else 50),
        lambda: suites.nc_factorization_suite(),
        lambda: suites.lifting_suite(seed, 2 if quick else 20),
        lambda: suites.omax_suite(seed, 10 if quick else 50),
        lambda: suites.choi_crosscheck_suite(seed, 10 if quick else 100, tols=ctx.tols),
    ]
    for run in runs:
        r = run()
        rep.verdict(r.name, VERIFIED if r.passed else REFUTED, checks=r.checked, failures=r.failures,
                    **r.detail)
        rep.timings[r.name] = round(r.seconds, 3)


HANDLERS = {
    "check-min": cmd_check_min, "check-max-witness": cmd_check_max_witness,
    "certify-kirchberg": cmd_certify_kirchberg, "build-coproduct": cmd_build_coproduct,
    "quotient-check": cmd_quotient_check, "universal-quotient": cmd_universal_quotient,
    "lift": cmd_lift, "nc-factorize": cmd_nc_factorize, "demo-omax": cmd_demo_omax,
    "selftest": cmd_selftest,
}


# --- driver -----------------------------------------------------------------------------

def parse_scenario(data: dict, source: str = "<scenario>") -> Scenario:
    if not isinstance(data, dict):
        raise SchemaError(f"{source}: a scenario must be a JSON object")
    if data.get("version", serialize.SCHEMA_VERSION) != serialize.SCHEMA_VERSION:
        from .errors import VersionMismatch
        raise VersionMismatch(f"{source}: scenario version {data.get('version')!r} is not supported")
    try:
        sc = Scenario.model_validate(data)
        INPUT_MODELS[sc.command].model_validate(sc.inputs)
    except ValidationError as e:
        raise SchemaError(f"{source}: {serialize.format_validation_error(e)}") from None
    return sc


def run(scenario: Scenario, base: Path | str = ".", overrides: dict | None = None) -> Report:
    """Execute a scenario and return its report; ``overrides`` (the command-line
    tolerance flags) take precedence over the scenario's tolerances."""
    over = scenario.tolerances.model_dump() if scenario.tolerances else {}
    tols = DEFAULT.with_overrides(**over).with_overrides(**(overrides or {}))
    config = {"seed": scenario.seed, "tolerances": tols.__dict__.copy(), "inputs": scenario.inputs}
    rep = Report(scenario.command, config)
    ctx = Context(scenario, Path(base), tols)
    inputs = INPUT_MODELS[scenario.command].model_validate(scenario.inputs)
    t0 = time.perf_counter()
    HANDLERS[scenario.command](ctx, inputs, rep)
    rep.timings["total"] = round(time.perf_counter() - t0, 3)
    return rep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opsyskit", description="Operator system certificates and checks.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="pipeline to run (or take it from --scenario)")
    p.add_argument("--scenario", type=Path, help="scenario JSON file")
    p.add_argument("--seed", type=int, help="seed for randomized runs (unsigned 64-bit)")
    p.add_argument("--tol-feas", type=float, help="feasibility tolerance")
    p.add_argument("--tol-cert", type=float, help="certificate tolerance")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "text"), default="json")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.scenario is not None:
            try:
                text = args.scenario.read_text()
            except OSError as e:
                raise SchemaError(f"cannot read scenario {args.scenario}: {e.strerror}") from None
            data = serialize.parse_json(text, str(args.scenario))
            base = args.scenario.parent
        elif args.command is not None:
            data = {"command": args.command}
            base = Path(".")
        else:
            raise SchemaError("give a command or --scenario")
        if args.command is not None and data.get("command", args.command) != args.command:
            raise SchemaError(f"command {args.command!r} does not match the scenario's {data.get('command')!r}")
        data.setdefault("command", args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise SchemaError("--seed must be an unsigned 64-bit integer")
            data["seed"] = args.seed
        sc = parse_scenario(data, str(args.scenario or "<command line>"))
        rep = run(sc, base, {"feas": args.tol_feas, "cert": args.tol_cert})
    except (OpsysError, InvalidInput, ValidationError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    out = rep.to_text() if args.format == "text" else json.dumps(rep.to_dict(), indent=1)
    if args.out is not None:
        try:
            args.out.write_text(out + "\n")
        except OSError as e:
            print(f"error: cannot write {args.out}: {e.strerror}", file=sys.stderr)
            return 1
    else:
        print(out)
    return rep.exit_code()


if __name__ == "__main__":
    sys.exit(main())
