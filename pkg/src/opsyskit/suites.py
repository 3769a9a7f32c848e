"""Property suites shared by the selftest command and the acceptance tests.

Each suite takes a seed and instance counts and returns a :class:`SuiteResult`;
the selftest runs them at small counts, the acceptance tests at full size.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances, resolve
from .constructions import (coproduct, pad_factorization, pair_algebra, perturbed_lift,
                            random_lift_instance, universal_quotient)
from .constructions.coproduct import (CoproductElement, recenter, refute, shift_value, verify_family,
                                      verify_shifts)
from .constructions.universal import affine_element, matrix_pair_system
from .errors import InvalidInput
from .numerics.linalg import block_diag, random_hermitian, random_psd
from .omax_demo import no_lift_proof, omax_lift, random_target
from .opsys.maps import CpStatus, cp_check, map_from_choi, verify_extension, verify_witness
from .opsys.systems import ell_inf, matrix_algebra
from .tensor import dmax_check, kirchberg_certify, max_witness, nc_factorization, random_min_positive


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checked: int
    failures: list[str] = field(default_factory=list)
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{mark}] {self.name}: {self.checked} checks in {self.seconds:.1f}s" + (f" ({extra})" if extra else "")


def _fmt(v) -> str:
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def _result(name, failures, checked, detail, t0) -> SuiteResult:
    return SuiteResult(name, not failures, checked, failures[:10], detail, time.time() - t0)


def _shift_to(h: np.ndarray, lam: float) -> np.ndarray:
    """``h`` moved by a multiple of the identity so its smallest eigenvalue is ``lam``."""
    return h + (lam - np.linalg.eigvalsh(h)[0]) * np.eye(h.shape[0])


# 1 -----------------------------------------------------------------------------------------

def matrix_pair_suite(seed: int = 0, count: int = 200, ks=(1, 2, 3), levels=(1, 2),
                      grid_points: int = 101, tol: float = 1e-9, cp_grid: int = 3) -> SuiteResult:
    """Grid positivity of ``α + tβ`` versus positivity of ``(α, α+β)``, and CP of both directions."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, grid_points)
    failures, checked, agree_pos = [], 0, 0
    for k in ks:
        model = matrix_pair_system(k, grid)
        for n in levels:
            size = n * k
            for i in range(count):
                a = _shift_to(random_hermitian(rng, size), rng.uniform(-0.5, 0.5))
                b = _shift_to(random_hermitian(rng, size), rng.uniform(-0.5, 0.5)) - a
                on_grid = min(np.linalg.eigvalsh(a + t * b)[0] for t in grid) >= -tol
                # same element read through the model: level-n layout M_n ⊗ (grid blocks of M_k)
                x = _level_affine(a, b, grid, n, k)
                pair = model.forward.apply(x, n)
                at_ends = np.linalg.eigvalsh(pair)[0] >= -tol
                checked += 1
                agree_pos += on_grid
                if on_grid != at_ends:
                    failures.append(f"k={k} n={n} #{i}: grid {on_grid} vs pair {at_ends}")
        cp_model = model if cp_grid == grid_points else matrix_pair_system(k, np.linspace(0, 1, cp_grid))
        for name, f in (("forward", cp_model.forward), ("backward", cp_model.backward)):
            v = cp_check(f)
            checked += 1
            if v.status is not CpStatus.CP or f.unit_defect() > 1e-12:
                failures.append(f"k={k}: {name} map not verified unital CP ({v.status.value})")
    return _result("matrix-pair isomorphism", failures, checked, {"positive": agree_pos}, t0)


def _level_affine(a: np.ndarray, b: np.ndarray, grid, n: int, k: int) -> np.ndarray:
    """``α ⊗ 1 + β ⊗ t`` for ``α, β ∈ M_n(M_k)`` in the layout ``M_n ⊗ (⊕_t M_k)``."""
    g = len(grid)
    amb = g * k
    out = np.zeros((n, amb, n, amb), dtype=complex)
    a4, b4 = a.reshape(n, k, n, k), b.reshape(n, k, n, k)
    for i, t in enumerate(grid):
        sl = slice(i * k, (i + 1) * k)
        out[:, sl, :, sl] = a4 + t * b4
    return out.reshape(n * amb, n * amb)


# 2 -----------------------------------------------------------------------------------------

def coproduct_duality_suite(seed: int = 0, count: int = 100, tols: Tolerances | None = None) -> SuiteResult:
    """Shift certificates and compatible-family refutations never both verify, and one of them
    always does outside the band ``|value| < feas``."""
    t0 = time.time()
    t = resolve(tols)
    rng = np.random.default_rng(seed)
    failures, banded, members, refuted = [], 0, 0, 0
    for i in range(count):
        m = int(rng.integers(2, 4))
        cs = coproduct([pair_algebra(int(rng.integers(1, 3))) for _ in range(m)])
        n = int(rng.integers(1, 3))
        parts = []
        for c in cs.components:
            parts.append(block_diag([random_hermitian(rng, n * b) for b in c.blocks])
                         if n == 1 else _level_block_hermitian(rng, n, c.blocks))
        x = CoproductElement(cs, n, tuple(parts))
        value, _, _ = shift_value(x, t, cap=10.0)
        # place the instance at a random distance from the boundary, some inside the band
        target = rng.choice([rng.uniform(-0.3, 0.3), rng.uniform(-3, 3) * t.feas])
        x = x.shifted(target - value)
        value, shifts, _ = shift_value(x, t, cap=10.0)
        fam, _ = refute(x, 0.0, t)
        cert = shifts is not None and verify_shifts(x, recenter(shifts), 0.0)
        wit = fam is not None and verify_family(x, fam, 0.0)
        if cert and wit:
            failures.append(f"#{i}: both a shift certificate and a refutation verified (value {value:.3e})")
        if abs(value) < t.feas:
            banded += 1
            continue
        if not (cert or wit):
            failures.append(f"#{i}: neither side verified at value {value:.3e}")
        if value > 0 and not cert or value < 0 and not wit:
            failures.append(f"#{i}: wrong side verified at value {value:.3e}")
        members += cert
        refuted += wit
    return _result("coproduct duality", failures, count,
                   {"member": members, "refuted": refuted, "band": banded}, t0)


def _level_block_hermitian(rng, n: int, blocks) -> np.ndarray:
    amb = sum(blocks)
    out = np.zeros((n, amb, n, amb), dtype=complex)
    o = 0
    for b in blocks:
        h = random_hermitian(rng, n * b).reshape(n, b, n, b)
        out[:, o:o + b, :, o:o + b] = h
        o += b
    return out.reshape(n * amb, n * amb)


# 3 -----------------------------------------------------------------------------------------

def _positive_contraction(rng, size: int) -> np.ndarray:
    p = random_psd(rng, size)
    return p / np.linalg.eigvalsh(p)[-1] * rng.uniform(0.3, 1.0)


def universal_quotient_suite(seed: int = 0, families: int = 3) -> SuiteResult:
    t0 = time.time()
    rng = np.random.default_rng(seed)
    failures, checked, worst_map = [], 0, 0.0
    targets = [("linf2", ell_inf(2)), ("linf3", ell_inf(3)), ("M2", matrix_algebra(2))]
    for name, target in targets:
        for f in range(families):
            a = target.amb
            gens = []
            for k in (1, 2):
                raw = _positive_contraction(rng, k * a)
                # project onto M_k(target): block diagonal in the ambient
                x = _project_level(raw, k, target)
                x = x / np.linalg.eigvalsh(x)[-1] * rng.uniform(0.3, 1.0)
                gens.append((k, x))
            uq = universal_quotient(target, gens)
            chk = uq.phi.check()
            checked += 1
            if not (chk["unital"] and chk["cp"]):
                failures.append(f"{name}/{f}: Phi not verified unital CP")
            for i, (k, x) in enumerate(gens):
                lift = uq.lift(i)
                img = uq.phi.apply(lift)
                err = float(np.abs(img - x).max())
                worst_map = max(worst_map, err)
                norm = float(np.linalg.norm(lift.parts[i], 2))
                bound = k * k * float(np.linalg.eigvalsh(x)[-1])
                checked += 1
                if err > 1e-12:
                    failures.append(f"{name}/{f}: Phi(lift) differs from the generator by {err:.2e}")
                if abs(norm - bound) > 1e-12 * max(1.0, bound):
                    failures.append(f"{name}/{f}: lift norm {norm:.6g} != k^2 |x| = {bound:.6g}")
    return _result("universal quotient", failures, checked, {"max |Phi(lift)-x|": worst_map}, t0)


def _project_level(x: np.ndarray, k: int, target) -> np.ndarray:
    a = target.amb
    mask = np.zeros((a, a))
    for sl in target.block_slices():
        mask[sl, sl] = 1.0
    xs = (x.reshape(k, a, k, a) * mask[None, :, None, :]).reshape(k * a, k * a)
    return xs - min(0.0, float(np.linalg.eigvalsh(xs)[0])) * np.eye(k * a)


# 4 -----------------------------------------------------------------------------------------

def padding_suite(pairs=((1, 2), (2, 3), (2, 5))) -> SuiteResult:
    t0 = time.time()
    failures = []
    for a, k in pairs:
        pf = pad_factorization(a, k)
        if pf.roundtrip_defect() != 0.0:
            failures.append(f"({a},{k}): Q∘J defect {pf.roundtrip_defect():.2e}")
        for name, f in (("J", pf.J), ("Q", pf.Q)):
            if f.unit_defect() > 1e-12 or not cp_check(f).cp:
                failures.append(f"({a},{k}): {name} not verified unital CP")
    return _result("padding", failures, 3 * len(pairs), {}, t0)


# 5 and 6 ---------------------------------------------------------------------------------

def kirchberg_configurations():
    for m in (2, 3):
        for ks in itertools.combinations_with_replacement((1, 2), m):
            for d in (2, 3):
                yield ks, d


def kirchberg_suite(seed: int = 0, per_config: int = 20, residual_tol: float = 1e-8,
                    delta_tol: float = 1e-6, configs=None, keep: list | None = None) -> SuiteResult:
    """Certificates for random strictly min-positive elements, each re-checked by ``dmax_check``.

    Instances are appended to ``keep`` as ``(z, certificate, report)`` when given.
    """
    t0 = time.time()
    rng = np.random.default_rng(seed)
    failures, checked, worst_r, worst_d = [], 0, 0.0, 0.0
    for ks, d in (configs or list(kirchberg_configurations())):
        cs = coproduct([pair_algebra(k) for k in ks])
        for i in range(per_config):
            z = random_min_positive(cs, d, rng, margin=0.1)
            checked += 1
            try:
                res = kirchberg_certify(cs, d, z)
            except Exception as e:  # any failure to certify counts against the suite
                failures.append(f"{ks} d={d} #{i}: {type(e).__name__}: {e}")
                continue
            rep = dmax_check(res.certificate, z, delta_tol=delta_tol)
            worst_r, worst_d = max(worst_r, rep.residual), max(worst_d, abs(rep.delta))
            if not (rep.p_ok and rep.q_ok and rep.residual <= residual_tol and abs(rep.delta) <= delta_tol):
                failures.append(f"{ks} d={d} #{i}: residual {rep.residual:.2e} delta {rep.delta:.2e}")
            if keep is not None:
                keep.append((z, res.certificate, rep))
    return _result("kirchberg certificates", failures, checked,
                   {"max residual": worst_r, "max delta": worst_d}, t0)


def witness_soundness_suite(instances: list, seed: int = 0, adversarial: int = 50) -> SuiteResult:
    """No element gets both a verified max certificate and a verified max witness at slack 0.

    ``instances`` are ``(z, certificate, report)`` triples from the certificate suite.  The
    adversarial elements have negative min margin; each is offered a certificate forged for
    the nearest positive element.
    """
    t0 = time.time()
    rng = np.random.default_rng(seed)
    failures, both, witnessed = [], 0, 0
    for i, (z, cert, rep) in enumerate(instances):
        w = max_witness(z, 0.0)
        if rep.ok and w is not None:
            both += 1
            failures.append(f"positive #{i}: certificate and witness both verified")
    configs = list(kirchberg_configurations())
    for i in range(adversarial):
        ks, d = configs[i % len(configs)]
        cs = coproduct([pair_algebra(k) for k in ks])
        margin = -float(rng.uniform(1e-3, 0.5))
        z = random_min_positive(cs, d, rng, margin=margin)
        w = max_witness(z, 0.0)
        forged = kirchberg_certify(cs, d, random_min_positive_shift(z, 0.1 - margin))
        rep = dmax_check(forged.certificate, z)
        cert_ok = rep.ok
        try:
            kirchberg_certify(cs, d, z)
            cert_ok = True
            failures.append(f"adversarial #{i}: certified a non-positive element")
        except InvalidInput:
            pass
        witnessed += w is not None
        if w is None:
            failures.append(f"adversarial #{i}: no witness at margin {margin:.3e}")
        if cert_ok and w is not None:
            both += 1
            failures.append(f"adversarial #{i}: certificate and witness both verified")
    return _result("witness soundness", failures, len(instances) + adversarial,
                   {"both": both, "witnessed": witnessed}, t0)


def random_min_positive_shift(z, s: float):
    """``z + s·unit``."""
    from .tensor.cones import TensorElement
    parts = list(z.parts)
    parts[0] = parts[0] + s * np.eye(parts[0].shape[0])
    return TensorElement(z.left, z.right, z.level, tuple(parts))


# 7 -----------------------------------------------------------------------------------------

def nc_factorization_suite() -> SuiteResult:
    t0 = time.time()
    failures = []
    cs = coproduct([pair_algebra(2), pair_algebra(3)])
    nf = nc_factorization(cs)
    defect = nf.roundtrip_defect()
    if defect > 1e-12:
        failures.append(f"Psi∘Phi defect {defect:.2e}")
    for name, f in (("Phi", nf.phi), ("Psi", nf.psi)):
        chk = f.check()
        if not (chk["unital"] and chk["cp"]):
            failures.append(f"{name} not verified unital CP")
    return _result("nc factorization", failures, 3, {"defect": defect}, t0)


# 8 -----------------------------------------------------------------------------------------

def lifting_suite(seed: int = 0, count: int = 20, eps: float = 0.01) -> SuiteResult:
    t0 = time.time()
    rng = np.random.default_rng(seed)
    failures, not_cp_before = [], 0
    for i in range(count):
        inst = random_lift_instance(rng)
        not_cp_before += cp_check(inst.phi).not_cp
        res = perturbed_lift(inst.phi, inst.q, inst.density, eps)
        if res is None:
            failures.append(f"#{i}: no certified Choi lift")
            continue
        if not res.verdict.cp:
            failures.append(f"#{i}: lift + eps*omega*unit is {res.verdict.status.value}")
        herm = max(float(np.abs(v - v.conj().T).max()) for v in res.lift.values)
        if herm > 1e-9:
            failures.append(f"#{i}: lift is not self-adjoint ({herm:.2e})")
    return _result("perturbed lifting", failures, count, {"raw map not CP": not_cp_before}, t0)


# 9 -----------------------------------------------------------------------------------------

def omax_suite(seed: int = 0, count: int = 50, eps: float = 0.05, v_norms=(1.0, 0.5, 0.001)) -> SuiteResult:
    t0 = time.time()
    rng = np.random.default_rng(seed)
    failures, worst = [], 0.0
    for i in range(count):
        n = 1 + i % 2
        a1, a2 = random_target(rng, n)
        lift = omax_lift(a1, a2, eps)
        scale = max(1.0, float(np.abs(a1).max()), float(np.abs(a2).max()))
        worst = max(worst, lift.projection_defect / scale)
        if not lift.audit_ok:
            failures.append(f"#{i}: audit failed: {lift.notes}")
        if lift.projection_defect > 1e-12 * scale:
            failures.append(f"#{i}: projection defect {lift.projection_defect:.2e}")
    for v in v_norms:
        rec = no_lift_proof(v)
        if not rec.impossible or not rec.gap > 0:
            failures.append(f"v_norm={v}: impossibility record not established")
    return _result("omax lifting", failures, count + len(v_norms), {"max rel defect": worst}, t0)


# 10 ----------------------------------------------------------------------------------------

def choi_crosscheck_suite(seed: int = 0, count: int = 100, max_size: int = 4,
                          tols: Tolerances | None = None) -> SuiteResult:
    """``cp_check`` against Choi-matrix PSD for random maps ``M_p -> M_q``, with every SDP
    verdict re-verified independently."""
    t0 = time.time()
    t = resolve(tols)
    rng = np.random.default_rng(seed)
    failures, cps = [], 0
    for i in range(count):
        p, q = (int(v) for v in rng.integers(1, max_size + 1, size=2))
        lam = float(rng.choice([-1, 1]) * rng.uniform(0.05, 1.0))
        c = _shift_to(random_hermitian(rng, p * q), lam)
        phi = map_from_choi(c, p, q)
        direct = np.linalg.eigvalsh(c)[0] >= 0
        v = cp_check(phi, t)
        cps += v.cp
        if v.status is CpStatus.UNKNOWN or v.cp != direct:
            failures.append(f"#{i} ({p}->{q}): cp_check {v.status.value}, Choi min eig {lam:.3f}")
            continue
        if v.cp and not verify_extension(phi, v.choi_blocks, t.feas)[0]:
            failures.append(f"#{i}: extension did not re-verify")
        if v.not_cp:
            level, x = v.witness
            if not verify_witness(phi, 0, level, x, t.feas):
                failures.append(f"#{i}: witness did not re-verify")
    return _result("choi cross-check", failures, count, {"cp": cps}, t0)
