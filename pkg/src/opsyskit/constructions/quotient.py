"""Kernels, quotient systems and complete-order-quotient checks.

Quotient cones are only decided in their ε-relaxed form: the class of
``x`` is ε-positive when some ``k ∈ M_n(J)`` makes ``x + k + ε I`` PSD.
The refuting side is a state on the ambient annihilating ``M_n(J)`` and
negative on ``x + ε I``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from ..config import Tolerances, resolve
from ..errors import InvalidInput, ShapeMismatch
from ..numerics.linalg import MembershipVerdict, Status, herm_part, hermitian
from ..numerics.sdp import Affine, SdpProblem, max_margin, sdp_solve
from ..opsys.maps import CpMap, map_from_function
from ..opsys.systems import ConcreteOperatorSystem, split_levels


@dataclass(eq=False)
class KernelSubspace:
    parent: ConcreteOperatorSystem
    span: tuple[np.ndarray, ...]
    provenance: CpMap | None

    @property
    def dim(self) -> int:
        return len(self.span)


def make_kernel(parent: ConcreteOperatorSystem, span: Sequence[np.ndarray], provenance: CpMap,
                tols: Tolerances | None = None) -> KernelSubspace:
    """Validate that ``span`` lies in the null space of the unital CP ``provenance``
    and meets no strictly positive element."""
    t = resolve(tols)
    if provenance.domain is not parent:
        raise InvalidInput("the provenance map must start at the parent system")
    if provenance.unit_defect() > t.feas:
        raise InvalidInput("the provenance map is not unital")
    mats = []
    for s in span:
        h = hermitian(s)
        if h.shape != (parent.amb, parent.amb):
            raise ShapeMismatch("kernel element does not fit the parent ambient")
        if parent.span_residual(h) > t.feas:
            raise InvalidInput("kernel element is outside the parent span")
        if np.abs(provenance.apply(h)).max() > t.feas * max(1.0, float(np.abs(h).max())):
            raise InvalidInput("kernel element is not annihilated by the provenance map")
        mats.append(h)
    if mats:
        g = np.stack([m.ravel() for m in mats], axis=1)
        sv = np.linalg.svd(g, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise InvalidInput("kernel spanning set is dependent")
        # no u in span with u ⪰ δ·1: after scaling any such u would reach the cap
        p = SdpProblem()
        cs = [p.real(f"c{i}") for i in range(len(mats))]
        u = Affine(np.zeros_like(mats[0]))
        for c, m in zip(cs, mats):
            u = u + c.expand(m)
        tvar = max_margin(p, [u], cap=1.0)
        out = sdp_solve(p, t)
        if out.has_primal and out.objective_value > 0.5:
            raise InvalidInput("span contains a strictly positive element; it cannot be a kernel")
    return KernelSubspace(parent, tuple(mats), provenance)


def kernel_of(phi: CpMap, tol: float = 1e-10) -> KernelSubspace:
    """Hermitian basis of the null space of a self-adjoint map, with ``phi`` as provenance."""
    dom = phi.domain
    a = np.stack([v.ravel() for v in phi.values], axis=1)
    a_real = np.vstack([a.real, a.imag])
    _, s, vt = np.linalg.svd(a_real)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    null = vt[rank:]
    span = [sum(c * b for c, b in zip(row, dom.basis)) for row in null]
    return KernelSubspace(dom, tuple(herm_part(m) for m in span), phi)


@dataclass(eq=False)
class QuotientSystem:
    parent: ConcreteOperatorSystem
    kernel: KernelSubspace


def quotient(kernel: KernelSubspace) -> QuotientSystem:
    return QuotientSystem(kernel.parent, kernel)


def _kernel_expr(p: SdpProblem, q: QuotientSystem, n: int):
    cs = [p.hermitian(f"C{j}", n) for j in range(q.kernel.dim)]
    amb = q.parent.amb
    k = Affine(np.zeros((n * amb, n * amb), dtype=complex))
    for c, j in zip(cs, q.kernel.span):
        k = k + c.kron(right=j)
    return k, cs


def quotient_membership(q: QuotientSystem, x: np.ndarray, level: int = 1, eps: float = 1e-6,
                        tols: Tolerances | None = None) -> MembershipVerdict:
    """ε-relaxed positivity of the class of the level-``n`` parent element ``x``.

    ``Member`` carries ``k = sum_j C_j ⊗ j_j`` with ``x + k + ε I ⪰ 0``;
    ``NonMember`` carries a state annihilating ``M_n(J)`` with negative value
    on ``x + ε I``.
    """
    t = resolve(tols)
    if eps <= 0:
        raise InvalidInput("quotient membership is decided only for eps > 0")
    x = hermitian(x, atol=1e-9)
    size = level * q.parent.amb
    if x.shape != (size, size):
        raise ShapeMismatch("element does not fit the parent at this level")
    if q.parent.level_residual(x, level) > t.feas * max(1.0, float(np.abs(x).max())):
        raise InvalidInput("element is outside M_n(parent)")
    target = x + eps * np.eye(size)
    if q.kernel.dim == 0:
        lam, vec = np.linalg.eigh(target)
        if lam[0] >= -t.feas:
            return MembershipVerdict(Status.MEMBER, float(lam[0]), certificate=np.zeros_like(x))
        return MembershipVerdict(Status.NON_MEMBER, float(lam[0]), witness=np.outer(vec[:, 0], vec[:, 0].conj()))
    p = SdpProblem()
    k, _ = _kernel_expr(p, q, level)
    scale = max(1.0, float(np.abs(x).max()))
    max_margin(p, [Affine.constant(target) + k], cap=scale)
    out = sdp_solve(p, t)
    info = {"stats": out.stats}
    if out.has_primal and out.objective_value >= -t.feas:
        kval = herm_part(k.value(out.y))
        lam = float(np.linalg.eigvalsh(target + kval)[0])
        if lam >= -t.feas * scale:
            return MembershipVerdict(Status.MEMBER, lam, certificate=kval, info=info)
    if out.has_primal:
        rho = _annihilating_state(q, target, level, t)
        if rho is not None:
            val = float(np.real(np.sum(rho.T * target)))
            return MembershipVerdict(Status.NON_MEMBER, val, witness=rho, info=info)
    return MembershipVerdict(Status.UNKNOWN, out.objective_value, info=info)


def _annihilating_state(q: QuotientSystem, target: np.ndarray, n: int, t: Tolerances):
    p = SdpProblem()
    size = target.shape[0]
    rho = p.hermitian("rho", size)
    p.add_psd(rho)
    p.add_eq(rho.trace(), 1.0)
    amb = q.parent.amb
    for j in q.kernel.span:
        # tr(rho (e_ab ⊗ j)) = 0 for all a, b
        p.add_eq(rho.map(lambda m, j=j: np.einsum("iajb,ab->ij", m.reshape(n, amb, n, amb), j.T)), 0.0)
    p.minimize(rho.pair(target))
    out = sdp_solve(p, t)
    if not out.has_primal:
        return None
    r = herm_part(out["rho"])
    if verify_annihilating_state(q, r, target, n, t.feas):
        return r
    return None


def verify_annihilating_state(q: QuotientSystem, rho: np.ndarray, target: np.ndarray, n: int,
                              tol: float) -> bool:
    if np.linalg.eigvalsh(rho)[0] < -tol or abs(np.trace(rho) - 1) > tol:
        return False
    amb = q.parent.amb
    r = rho.reshape(n, amb, n, amb)
    for j in q.kernel.span:
        if np.abs(np.einsum("iajb,ab->ij", r, j.T)).max() > tol:
            return False
    return float(np.real(np.sum(rho.T * target))) < -tol


# --- complete order quotient maps ----------------------------------------------------

class QuotientCheck(str, Enum):
    VERIFIED = "Verified"
    FAILED = "Failed"
    UNKNOWN = "Unknown"


@dataclass
class QuotientReport:
    status: QuotientCheck
    level: int | None = None
    target: np.ndarray | None = None
    refutation: np.ndarray | None = None
    lifts: dict = field(default_factory=dict)
    exact: bool = False
    info: dict = field(default_factory=dict)


def preimage(phi: CpMap, y: np.ndarray, n: int) -> np.ndarray:
    """Some level-``n`` preimage of ``y`` (least squares on coordinates)."""
    dom, cod = phi.domain, phi.codomain
    a = np.stack([v.ravel() for v in phi.values], axis=1)
    parts = split_levels(np.asarray(y, dtype=complex), n, cod.amb).reshape(n, n, -1)
    coef = np.linalg.lstsq(a, parts.reshape(n * n, -1).T, rcond=None)[0].T.reshape(n, n, -1)
    amb = dom.amb
    out = np.zeros((n * amb, n * amb), dtype=complex)
    basis = np.stack(dom.basis)
    for i in range(n):
        for j in range(n):
            out[i * amb:(i + 1) * amb, j * amb:(j + 1) * amb] = np.einsum("k,kab->ab", coef[i, j], basis)
    return out


def _is_full_block_algebra(s: ConcreteOperatorSystem) -> bool:
    return s.dim == sum(b * b for b in s.blocks)


def _choi_generators(cod: ConcreteOperatorSystem) -> list[tuple[int, np.ndarray]]:
    """``[e_ab]`` placed in each codomain block, as level-``q_l`` elements."""
    out = []
    amb = cod.amb
    for sl in cod.block_slices():
        ql = sl.stop - sl.start
        e = np.zeros((ql * amb, ql * amb), dtype=complex)
        for a in range(ql):
            for b in range(ql):
                e[a * amb + sl.start + a, b * amb + sl.start + b] = 1.0
        out.append((ql, e))
    return out


def _random_positive_targets(cod: ConcreteOperatorSystem, n: int, rng, count: int):
    out = []
    basis = np.stack(cod.basis)
    amb = cod.amb
    for _ in range(count):
        x = np.zeros((n * amb, n * amb), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                c = rng.normal(size=cod.dim) + (1j * rng.normal(size=cod.dim) if i != j else 0)
                blk = np.einsum("k,kab->ab", c, basis)
                x[i * amb:(i + 1) * amb, j * amb:(j + 1) * amb] = blk
                if i != j:
                    x[j * amb:(j + 1) * amb, i * amb:(i + 1) * amb] = blk.conj().T
        x = herm_part(x)
        x = x - np.linalg.eigvalsh(x)[0] * np.eye(n * amb)  # push onto the boundary
        out.append(x)
    return out


def quotient_map_check(phi: CpMap, levels: Sequence[int] = (1, 2), eps: float = 1e-6,
                       tols: Tolerances | None = None, samples: int = 8, seed: int = 0) -> QuotientReport:
    """Check the complete order quotient property of a unital CP surjection.

    For a codomain that is a full block algebra the check is exact: lifting
    the Choi generator of every block at ``ε`` settles all levels.  For a
    proper subsystem codomain, boundary targets are sampled at the requested
    levels; a failed lift is a verified refutation, while success on samples
    is reported as ``Unknown``.
    """
    t = resolve(tols)
    dom, cod = phi.domain, phi.codomain
    a = np.stack([v.ravel() for v in phi.values], axis=1)
    rank = np.linalg.matrix_rank(a, tol=1e-10)
    if rank < cod.dim:
        raise InvalidInput("map is not surjective")
    q = quotient(kernel_of(phi))
    if _is_full_block_algebra(cod):
        targets = [(l, n, e) for l, (n, e) in enumerate(_choi_generators(cod))]
        exact = True
    else:
        rng = np.random.default_rng(seed)
        targets = [(None, n, y) for n in levels for y in _random_positive_targets(cod, n, rng, samples)]
        exact = False
    lifts = {}
    for key, n, y in targets:
        x0 = preimage(phi, y, n)
        if np.abs(phi.apply(x0, n) - y).max() > t.feas:
            raise InvalidInput("could not solve for a preimage")
        v = quotient_membership(q, x0, n, eps, t)
        if v.non_member:
            return QuotientReport(QuotientCheck.FAILED, level=n, target=y, refutation=v.witness,
                                  exact=exact, info={"value": v.margin})
        if v.unknown:
            return QuotientReport(QuotientCheck.UNKNOWN, level=n, target=y, exact=exact)
        lifts[(key, n, len(lifts))] = x0 + v.certificate
    if exact:
        return QuotientReport(QuotientCheck.VERIFIED, lifts=lifts, exact=True)
    return QuotientReport(QuotientCheck.UNKNOWN, lifts=lifts, exact=False,
                          info={"reason": "no failure among sampled targets"})
