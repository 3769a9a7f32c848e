"""Approximate lifting of CP maps from a block algebra into a quotient.

Given ``φ: E -> S/J`` CP with ``E = ⊕ M_{e_j}`` and a faithful state ``ω``
on ``E`` whose density has smallest eigenvalue ``λ``, every block's Choi
element ``[φ(E_ab)]`` is lifted at slack ``ε·λ``.  The resulting
self-adjoint ``φ̃: E -> S`` satisfies ``q∘φ̃ = φ`` and ``φ̃ + ε ω(·) 1`` is CP,
because the Choi matrix of ``ω(·)1`` on block ``j`` is ``ρ_j^T ⊗ 1 ⪰ λ I``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import Tolerances, resolve
from ..errors import InvalidInput
from ..numerics.linalg import (block_diag, herm_part, hermitian, off_block_norm, random_hermitian,
                               random_psd)
from ..opsys.maps import CpMap, CpVerdict, cp_check, map_from_function
from ..opsys.systems import full_algebra, make_system
from .quotient import QuotientSystem, kernel_of, make_kernel, quotient, quotient_membership


@dataclass(eq=False)
class PerturbedLift:
    lift: CpMap
    perturbed: CpMap
    verdict: CpVerdict
    kernel_parts: list
    lam: float


def _matrix_unit_images(phi: CpMap, sl: slice) -> list[list[np.ndarray]]:
    e = sl.stop - sl.start
    amb = phi.domain.amb
    out = [[None] * e for _ in range(e)]
    for a in range(e):
        for b in range(e):
            u = np.zeros((amb, amb), dtype=complex)
            u[sl.start + a, sl.start + b] = 1.0
            out[a][b] = phi.apply(u)
    return out


def perturbed_lift(phi: CpMap, q: QuotientSystem, density: np.ndarray, eps: float,
                   tols: Tolerances | None = None) -> PerturbedLift | None:
    """Self-adjoint lift ``φ̃`` of ``φ`` (values read as representatives in ``q.parent``)
    with ``φ̃ + ε ω(·) 1`` completely positive; ``None`` if a Choi lift is not certified."""
    t = resolve(tols)
    dom = phi.domain
    if phi.codomain is not q.parent:
        raise InvalidInput("phi must take representatives in the quotient's parent")
    if dom.dim != sum(b * b for b in dom.blocks):
        raise InvalidInput("the domain must be a full block algebra")
    rho = hermitian(density)
    lam_all = np.linalg.eigvalsh(rho)
    if lam_all[0] <= 0 or abs(np.trace(rho) - 1) > 1e-12:
        raise InvalidInput("omega must be a faithful state")
    if off_block_norm(rho, 1, dom.blocks) > 1e-12:
        raise InvalidInput("density must be block diagonal")
    lam = float(lam_all[0])
    amb = q.parent.amb
    lifted_units = {}
    kernel_parts = []
    for sl in dom.block_slices():
        e = sl.stop - sl.start
        imgs = _matrix_unit_images(phi, sl)
        choi = np.zeros((e * amb, e * amb), dtype=complex)
        for a in range(e):
            for b in range(e):
                choi[a * amb:(a + 1) * amb, b * amb:(b + 1) * amb] = imgs[a][b]
        v = quotient_membership(q, herm_part(choi), e, eps * lam, t)
        if not v.member:
            return None
        lifted = herm_part(choi) + v.certificate
        kernel_parts.append(v.certificate)
        for a in range(e):
            for b in range(e):
                lifted_units[(sl.start + a, sl.start + b)] = lifted[a * amb:(a + 1) * amb, b * amb:(b + 1) * amb]

    def lift_fn(x):
        out = np.zeros((amb, amb), dtype=complex)
        for (a, b), img in lifted_units.items():
            out = out + x[a, b] * img
        return out

    lift = map_from_function(dom, q.parent, lift_fn, name="lift")
    perturbed = map_from_function(dom, q.parent,
                                  lambda x: lift_fn(x) + eps * np.sum(rho.T * x) * np.eye(amb),
                                  name="lift+eps*omega")
    verdict = cp_check(perturbed, t)
    return PerturbedLift(lift, perturbed, verdict, kernel_parts, lam)



@dataclass(eq=False)
class LiftInstance:
    phi: CpMap
    q: QuotientSystem
    density: np.ndarray


def random_lift_instance(rng: np.random.Generator, blocks=(2, 3), parent_amb: int = 3,
                         parent_dim: int = 6, terms: int = 3) -> LiftInstance:
    """Random CP map from ``⊕ M_{b}`` into a random quotient of a random concrete system.

    The parent is spanned by the identity and random hermitians; the kernel is
    the null space of a compression ``s ↦ V* s V`` onto a random two-dimensional
    subspace.  The map sends ``x`` to an entanglement-breaking part
    ``sum tr(ρ_i x) p_i`` with ``p_i`` positive in the parent, plus kernel noise
    ``sum tr(h_i x) j_i``; it is CP into the quotient but not into the parent.
    """
    basis = [np.eye(parent_amb, dtype=complex)] + [random_hermitian(rng, parent_amb)
                                                   for _ in range(parent_dim - 1)]
    parent = make_system([parent_amb], basis, 0, name="S")
    g = rng.standard_normal((parent_amb, 2)) + 1j * rng.standard_normal((parent_amb, 2))
    v, _ = np.linalg.qr(g)
    compress = map_from_function(parent, full_algebra([2]), lambda s: v.conj().T @ s @ v, "compress")
    ker = make_kernel(parent, kernel_of(compress).span, compress)
    q = quotient(ker)
    dom = full_algebra(list(blocks), name="E")

    def density():
        return block_diag([random_psd(rng, b) for b in blocks])

    rhos = [density() for _ in range(terms)]
    rhos = [r / np.trace(r) for r in rhos]
    pos = []
    for _ in range(terms):
        s = sum(rng.standard_normal() * b for b in basis[1:])
        pos.append(s - (np.linalg.eigvalsh(s)[0] - 0.1) * np.eye(parent_amb))
    noise = [(herm_part(random_hermitian(rng, dom.amb) * block_diag([np.ones((b, b)) for b in blocks])), j)
             for j in ker.span]

    def f(x):
        out = sum(np.sum(r.T * x) * p for r, p in zip(rhos, pos))
        return out + sum(np.sum(h.T * x) * j for h, j in noise)

    phi = map_from_function(dom, parent, f, name="phi")
    w = density()
    return LiftInstance(phi, q, w / np.trace(w))
