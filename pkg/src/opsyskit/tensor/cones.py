"""Minimal and maximal tensor cones with certificates and witnesses.

A tensor element over ``L ⊗ R`` at level ``n`` is stored in the layout
``M_n ⊗ amb(L) ⊗ amb(R)``; when ``L`` is a coproduct the data is a tuple
with one such matrix per component.  ``R`` is always a concrete system and
in practice a full matrix algebra ``M_d``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..config import Tolerances, resolve
from ..constructions.coproduct import (CoproductElement, CoproductStatus, CoproductSystem,
                                       coproduct_membership)
from ..errors import InvalidInput, NotPSD, ShapeMismatch
from ..numerics.linalg import (MembershipVerdict, Status, herm_part, partial_trace, psd_check,
                               swap_factors)
from ..numerics.sdp import Affine, SdpProblem, sdp_solve
from ..opsys.systems import ConcreteOperatorSystem

Left = Union[ConcreteOperatorSystem, CoproductSystem]


def _ambs(left: Left) -> list[int]:
    if isinstance(left, CoproductSystem):
        return [c.amb for c in left.components]
    return [left.amb]


@dataclass(eq=False)
class TensorElement:
    left: Left
    right: ConcreteOperatorSystem
    level: int
    data: object  # ndarray, or tuple of ndarrays for a coproduct left factor

    @property
    def parts(self) -> tuple[np.ndarray, ...]:
        return self.data if isinstance(self.left, CoproductSystem) else (self.data,)

    def as_left_level(self) -> list[np.ndarray]:
        """Reorder each part to ``M_{n·R} ⊗ amb(L)``: an element of ``M_{nR}(L)``."""
        n, r = self.level, self.right.amb
        return [swap_factors(p, [n, a, r], [0, 2, 1]) for p, a in zip(self.parts, _ambs(self.left))]

    def as_right_level(self) -> list[np.ndarray]:
        """Reorder each part to ``amb(L) ⊗ M_n ⊗ amb(R)``: an element of ``L ⊗ M_n(R)``."""
        n, r = self.level, self.right.amb
        return [swap_factors(p, [n, a, r], [1, 0, 2]) for p, a in zip(self.parts, _ambs(self.left))]


def tensor_element(left: Left, right: ConcreteOperatorSystem, data, level: int = 1,
                   tols: Tolerances | None = None) -> TensorElement:
    t = resolve(tols)
    parts = tuple(np.asarray(p, dtype=complex) for p in data) if isinstance(left, CoproductSystem) \
        else (np.asarray(data, dtype=complex),)
    ambs = _ambs(left)
    if len(parts) != len(ambs):
        raise ShapeMismatch("one part per coproduct component is required")
    comps = left.components if isinstance(left, CoproductSystem) else (left,)
    for p, a, comp in zip(parts, ambs, comps):
        size = level * a * right.amb
        if p.shape != (size, size):
            raise ShapeMismatch(f"tensor part needs shape {(size, size)}, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInput("tensor element has non-finite entries")
        # membership in M_n ⊗ span(L) ⊗ span(R): project through both factors
        x = swap_factors(p, [level, a, right.amb], [0, 2, 1])
        if comp.level_residual(x, level * right.amb) > t.feas * max(1.0, float(np.abs(p).max())):
            raise InvalidInput("tensor element is outside the left factor's span")
        y = swap_factors(p, [level, a, right.amb], [1, 0, 2])
        if right.level_residual(y, a * level) > t.feas * max(1.0, float(np.abs(p).max())):
            raise InvalidInput("tensor element is outside the right factor's span")
    data = parts if isinstance(left, CoproductSystem) else parts[0]
    return TensorElement(left, right, level, data)


def unit_tensor(left: Left, right: ConcreteOperatorSystem, level: int = 1) -> TensorElement:
    ambs = _ambs(left)
    parts = [np.zeros((level * a * right.amb,) * 2, dtype=complex) for a in ambs]
    parts[0] = np.eye(parts[0].shape[0], dtype=complex)
    data = tuple(parts) if isinstance(left, CoproductSystem) else parts[0]
    return TensorElement(left, right, level, data)


def product_element(p: np.ndarray, k: int, q: np.ndarray, l: int, la: int, ra: int) -> np.ndarray:
    """``P ⊗ Q`` for ``P ∈ M_k(amb la)``, ``Q ∈ M_l(amb ra)`` in the layout ``M_{kl} ⊗ la ⊗ ra``."""
    pp = p.reshape(k, la, k, la)
    qq = q.reshape(l, ra, l, ra)
    out = np.einsum("aAbB,cCdD->acACbdBD", pp, qq)
    size = k * l * la * ra
    return out.reshape(size, size)


def min_membership(z: TensorElement, tol: float | None = None,
                   tols: Tolerances | None = None) -> MembershipVerdict:
    """Minimal tensor cone: ambient PSD for concrete factors; for a coproduct left
    factor, coproduct positivity of ``z`` read in ``M_{nR}(L)`` at slack ``tol``."""
    t = resolve(tols)
    tol = t.feas if tol is None else tol
    if not isinstance(z.left, CoproductSystem):
        return psd_check(herm_part(z.data), tol)
    x = CoproductElement(z.left, z.level * z.right.amb, tuple(z.as_left_level()))
    v = coproduct_membership(x, tol, t)
    status = {CoproductStatus.MEMBER: Status.MEMBER, CoproductStatus.REFUTED: Status.NON_MEMBER,
              CoproductStatus.UNKNOWN: Status.UNKNOWN}[v.status]
    return MembershipVerdict(status, v.value, witness=v.family, certificate=v.shifts, info=v.info)


# --- maximal cone certificates ---------------------------------------------------------------

@dataclass(eq=False)
class MaxCertificate:
    """``z ≈ α (P ⊗ Q) α*`` with ``P ∈ M_k(L)⁺``, ``Q ∈ M_l(R)⁺`` and ``α ∈ M_{n, kl}``."""

    left: Left
    right: ConcreteOperatorSystem
    level: int
    k: int
    l: int
    alpha: np.ndarray
    P: object  # ndarray, or CoproductElement for a coproduct left factor
    Q: np.ndarray
    delta: float = 0.0

    def p_parts(self) -> tuple[np.ndarray, ...]:
        return self.P.parts if isinstance(self.left, CoproductSystem) else (self.P,)

    def reconstruct(self) -> tuple[np.ndarray, ...]:
        ra = self.right.amb
        n = self.level
        out = []
        for p, a in zip(self.p_parts(), _ambs(self.left)):
            pq = product_element(p, self.k, self.Q, self.l, a, ra)
            big = np.kron(self.alpha, np.eye(a * ra))
            r = big @ pq @ big.conj().T
            out.append(r.reshape(n * a * ra, n * a * ra))
        return tuple(out)


@dataclass
class DmaxReport:
    ok: bool
    residual: float
    delta: float
    p_ok: bool
    q_ok: bool

    def __bool__(self) -> bool:
        return self.ok


def dmax_check(cert: MaxCertificate, target: TensorElement, tols: Tolerances | None = None,
               delta_tol: float | None = None) -> DmaxReport:
    """Pure verification of a max-cone certificate.

    The reconstruction must equal ``target + δ·(1⊗1)`` up to ``cert`` in
    max-abs entry (modulo unit identifications for a coproduct left factor),
    with ``|δ| ≤ delta_tol`` (default ``cert``).
    """
    t = resolve(tols)
    delta_tol = t.cert if delta_tol is None else delta_tol
    n, ra = target.level, target.right.amb
    if cert.alpha.shape != (n, cert.k * cert.l):
        raise ShapeMismatch(f"alpha must have shape {(n, cert.k * cert.l)}")
    if cert.Q.shape != (cert.l * ra, cert.l * ra):
        raise ShapeMismatch("Q does not fit the right factor")
    q_lam = np.linalg.eigvalsh(herm_part(cert.Q))[0]
    q_ok = bool(q_lam >= -t.cert * max(1.0, float(np.abs(cert.Q).max())))
    p_ok = True
    for p in cert.p_parts():
        lam = np.linalg.eigvalsh(herm_part(p))[0]
        if lam < -t.cert * max(1.0, float(np.abs(p).max())):
            p_ok = False
    if not p_ok and isinstance(cert.left, CoproductSystem):
        p_ok = coproduct_membership(cert.P, 0.0, t).member
    recon = cert.reconstruct()
    diff = [r - z for r, z in zip(recon, target.parts)]
    if isinstance(target.left, CoproductSystem):
        ambs = _ambs(target.left)
        x = CoproductElement(target.left, n * ra,
                             tuple(swap_factors(d, [n, a, ra], [0, 2, 1]) for d, a in zip(diff, ambs)))
        residual, delta = target.left.unit_residual(x)
    else:
        d = diff[0]
        delta = float(np.real(np.trace(d))) / d.shape[0]
        residual = float(np.abs(d - delta * np.eye(d.shape[0])).max())
    ok = p_ok and q_ok and residual <= t.cert and abs(delta) <= delta_tol
    return DmaxReport(ok, residual, delta, p_ok, q_ok)


def _entangled(b: int) -> np.ndarray:
    """``E_b = sum_ab e_ab ⊗ e_ab``."""
    v = np.eye(b).reshape(-1)
    return np.outer(v, v).astype(complex)


def psd_to_dmax(w: np.ndarray, level: int, blocks, d: int, tols: Tolerances | None = None):
    """Max-cone certificate for a PSD element of ``M_n((⊕ M_{b_j}) ⊗ M_d)``.

    Each ambient block is decomposed as a sum of rank-one terms; every term is
    ``α_r (E_b ⊗ E_d) α_r*`` and the terms are stacked into one certificate with
    ``P = ⊕_j (I_{R_j} ⊗ E^{(j)})`` and ``Q = E_d``.  Returns ``(alpha, P, k)``.
    """
    t = resolve(tols)
    blocks = [int(b) for b in blocks]
    amb = sum(blocks)
    n = level
    w = herm_part(np.asarray(w, dtype=complex))
    if w.shape != (n * amb * d,) * 2:
        raise ShapeMismatch("W does not fit the level and ambient")
    wt = w.reshape(n, amb, d, n, amb, d)
    offs = np.cumsum([0] + blocks)
    scale = max(1.0, float(np.abs(w).max()))
    cols, pblocks = [], []
    for j, b in enumerate(blocks):
        sl = slice(offs[j], offs[j + 1])
        wj = wt[:, sl, :, :, sl, :].reshape(n * b * d, n * b * d)
        lam, vec = np.linalg.eigh(wj)
        if lam[0] < -t.feas * scale:
            raise NotPSD(f"block {j} has eigenvalue {lam[0]:.3e}")
        keep = lam > t.eig * scale
        for lr, v in zip(lam[keep], vec[:, keep].T):
            cols.append(np.sqrt(lr) * v.reshape(n, b * d))
            e = np.zeros((b * amb, b * amb), dtype=complex)
            ent = _entangled(b).reshape(b, b, b, b)  # [a, a', b, b'] = δ_aa' δ_bb'
            et = e.reshape(b, amb, b, amb)
            et[:, sl, :, sl] = ent
            pblocks.append(et.reshape(b * amb, b * amb))
    if not cols:
        k = 1
        alpha = np.zeros((n, d), dtype=complex)
        p = np.zeros((amb, amb), dtype=complex)
        return alpha, p, k
    alpha = np.concatenate(cols, axis=1)
    sizes = [pb.shape[0] // amb for pb in pblocks]
    k = sum(sizes)
    p = np.zeros((k * amb, k * amb), dtype=complex)
    pt = p.reshape(k, amb, k, amb)
    o = 0
    for pb, s in zip(pblocks, sizes):
        pt[o:o + s, :, o:o + s, :] = pb.reshape(s, amb, s, amb)
        o += s
    return alpha, p, k


def max_certificate_from_psd(left: ConcreteOperatorSystem, right: ConcreteOperatorSystem, w: np.ndarray,
                             level: int, tols: Tolerances | None = None) -> MaxCertificate:
    """``psd_to_dmax`` for full block algebras ``left`` and a full matrix algebra ``right``."""
    d = right.amb
    alpha, p, k = psd_to_dmax(w, level, left.blocks, d, tols)
    return MaxCertificate(left, right, level, k, d, alpha, p, _entangled(d))


# --- witnesses -----------------------------------------------------------------------------

@dataclass(eq=False)
class MaxWitness:
    """Functional ``f(z) = sum tr(C^T Z)`` over ambient blocks of ``L ⊗ M_n(R)``.

    ``choi[ι][j]`` is PSD on block ``j`` of component ``ι`` tensored with
    ``M_{nR}``; the associated map ``L -> M_{nR}`` is CP, and for a coproduct the
    unit images ``sum_j Tr_1 C`` agree across components.
    """

    left: Left
    right: ConcreteOperatorSystem
    level: int
    choi: list
    value: float = float("nan")

    def evaluate(self, z: TensorElement) -> float:
        total = 0.0
        for i, part in enumerate(z.as_right_level()):
            comp = z.left.components[i] if isinstance(z.left, CoproductSystem) else z.left
            m = z.level * z.right.amb
            for j, sl in enumerate(comp.block_slices()):
                b = sl.stop - sl.start
                zt = part.reshape(comp.amb, m, comp.amb, m)[sl, :, sl, :].reshape(b * m, b * m)
                total += float(np.real(np.sum(self.choi[i][j] * zt)))
        return total

    def unit_value(self) -> float:
        return float(sum(np.real(np.trace(c)) for cs in self.choi for c in cs)) / len(self.choi)


def verify_witness(w: MaxWitness, z: TensorElement, eps: float, tol: float) -> bool:
    m = w.level * w.right.amb
    corners = []
    for i, blocks in enumerate(w.choi):
        comp = w.left.components[i] if isinstance(w.left, CoproductSystem) else w.left
        corner = np.zeros((m, m), dtype=complex)
        for c, sl in zip(blocks, comp.block_slices()):
            if np.linalg.eigvalsh(herm_part(c))[0] < -tol:
                return False
            corner += partial_trace(c, [sl.stop - sl.start, m], [1])
        corners.append(corner)
    if any(np.abs(c - corners[0]).max() > tol for c in corners[1:]):
        return False
    if abs(np.trace(corners[0]) - 1.0) > tol:
        return False
    return w.evaluate(z) < -eps


def max_witness(z: TensorElement, eps: float = 0.0, tols: Tolerances | None = None):
    """Search for a functional nonnegative on the max cone with ``f(z) < -ε``.

    Returns a verified :class:`MaxWitness` or ``None``; ``None`` is not a
    membership claim.
    """
    t = resolve(tols)
    if len(z.right.blocks) != 1 or z.right.dim != z.right.amb ** 2:
        raise InvalidInput("max_witness needs a full matrix algebra right factor")
    comps = z.left.components if isinstance(z.left, CoproductSystem) else (z.left,)
    m = z.level * z.right.amb
    p = SdpProblem()
    choi_vars = []
    corners = []
    obj = Affine(np.zeros((1, 1), dtype=complex))
    for i, (comp, part) in enumerate(zip(comps, z.as_right_level())):
        row = []
        corner = Affine(np.zeros((m, m), dtype=complex))
        for j, sl in enumerate(comp.block_slices()):
            b = sl.stop - sl.start
            c = p.hermitian(f"C{i}_{j}", b * m)
            p.add_psd(c)
            zt = herm_part(part.reshape(comp.amb, m, comp.amb, m)[sl, :, sl, :].reshape(b * m, b * m))
            obj = obj + c.pair(zt.T)
            corner = corner + c.map(lambda x, b=b: partial_trace(x, [b, m], [1]))
            row.append(c)
        choi_vars.append(row)
        corners.append(corner)
    for c in corners[1:]:
        p.add_eq(c - corners[0], 0.0)
    p.add_eq(corners[0].trace(), 1.0)
    p.minimize(obj)
    out = sdp_solve(p, t)
    if not out.has_primal or out.objective_value >= -eps:
        return None
    choi = [[herm_part(c.value(out.y)) for c in row] for row in choi_vars]
    w = MaxWitness(z.left, z.right, z.level, choi)
    w.value = w.evaluate(z)
    if verify_witness(w, z, eps, t.feas):
        return w
    return None
