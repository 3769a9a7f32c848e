"""Constructive max-cone certificates for coproducts of matrix pairs tensored with ``M_d``,
and the explicit factorization of ``ℓ∞² ⊕₁ ℓ∞³`` through such a coproduct.

Certification pipeline for a min-positive ``z ∈ M_n(cs ⊗ M_d)``:

1. build the dual package ``(K, Γ, Λ, ω)``;
2. read off ``φ = (Λ ⊗ id)(z): K -> M_{nd}``, which is CP;
3. extend ``φ`` to the whole direct sum by the Choi-block SDP;
4. turn the extension's Choi blocks into a PSD ``W`` in ``(⊕ A_ι) ⊗ M_d``
   with ``W ≡ |F| z`` modulo the unit identifications;
5. decompose ``W`` in the max cone;
6. push ``P`` through the realization inverse, ``P ↦ P / |F|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..config import Tolerances, resolve
from ..constructions.coproduct import (CoproductElement, CoproductMap, CoproductSystem, coproduct,
                                       shift_value)
from ..constructions.dual import dual_coproduct
from ..errors import InsufficientMargin, InvalidInput, MissingBlocks, NumericalBreakdown
from ..numerics.linalg import swap_factors
from ..opsys.maps import CpStatus, cp_check, map_from_function
from ..opsys.systems import ell_inf, full_algebra, matrix_algebra
from .cones import (MaxCertificate, TensorElement, _entangled, dmax_check, min_membership,
                    psd_to_dmax)


@dataclass
class KirchbergResult:
    certificate: MaxCertificate
    residual: float
    delta: float
    min_margin: float
    extension_margin: float


def kirchberg_certify(cs: CoproductSystem, d: int, z: TensorElement, eps: float | None = None,
                      tols: Tolerances | None = None) -> KirchbergResult:
    t = resolve(tols)
    if z.left is not cs or z.right.amb != d or z.right.dim != d * d:
        raise InvalidInput("z must live in M_n(cs ⊗ M_d)")
    if eps is not None and eps < 10 * t.feas:
        raise InsufficientMargin(f"margin {eps:.3e} is below solver resolution")
    n = z.level
    m = cs.size
    mv = min_membership(z, 0.0, t)
    if not mv.member:
        raise InvalidInput(f"z is not min-positive ({mv.status.value})")
    if mv.margin < t.feas:
        raise InsufficientMargin(f"min margin {mv.margin:.3e} is below solver resolution")
    pkg = dual_coproduct(cs)
    x = CoproductElement(cs, n * d, tuple(z.as_left_level()))
    phi = pkg.lam(x)
    verdict = cp_check(phi, t)
    if verdict.status is CpStatus.NOT_CP:
        raise NumericalBreakdown("the map attached to a min-positive element failed to be CP")
    if verdict.status is not CpStatus.CP:
        raise InsufficientMargin("extension step was inconclusive")
    # Choi blocks are indexed by K's ambient blocks, which run through the components in order
    blocks = list(pkg.K.blocks)
    comp_of_block = [i for i, c in enumerate(cs.components) for _ in c.blocks]
    amb = sum(blocks)
    nd = n * d
    w = np.zeros((nd, amb, nd, amb), dtype=complex)
    offs = np.cumsum([0] + blocks)
    for j, b in enumerate(blocks):
        c = verdict.choi_blocks[(j, 0)]
        wj = swap_factors(c, [b, nd], [1, 0]) / pkg.weights[comp_of_block[j]]
        w[:, offs[j]:offs[j + 1], :, offs[j]:offs[j + 1]] = wj.reshape(nd, b, nd, b)
    w = w.reshape(nd * amb, nd * amb)
    # M_{nd} ⊗ amb  ->  M_n ⊗ amb ⊗ M_d
    w = swap_factors(w, [n, d, amb], [0, 2, 1])
    alpha, p, k = psd_to_dmax(w, n, blocks, d, t)
    # transport P through the realization inverse: component parts scaled by 1/|F|
    pt = p.reshape(k, amb, k, amb)
    parts = []
    comp_offs = np.cumsum([0] + [c.amb for c in cs.components])
    for i in range(m):
        sl = slice(comp_offs[i], comp_offs[i + 1])
        a = comp_offs[i + 1] - comp_offs[i]
        parts.append(pt[:, sl, :, sl].reshape(k * a, k * a) / m)
    P = CoproductElement(cs, k, tuple(parts))
    cert = MaxCertificate(cs, z.right, n, k, d, alpha, P, _entangled(d))
    rep = dmax_check(cert, z, t)
    cert.delta = rep.delta
    return KirchbergResult(cert, rep.residual, rep.delta, mv.margin, verdict.margin)


# --- factorization of ℓ∞² ⊕₁ ℓ∞³ ------------------------------------------------------------

@dataclass(eq=False)
class NcFactorization:
    source: CoproductSystem
    target: CoproductSystem
    phi: CoproductMap
    psi: CoproductMap
    phi_fns: tuple
    psi_fns: tuple

    def roundtrip_defect(self) -> float:
        """``max |Ψ(Φ(b)) - b|`` over a basis of the source, on the defining formulas."""
        worst = 0.0
        for i, comp in enumerate(self.source.components):
            tgt, f = self.phi_fns[i]
            tgt2, g = self.psi_fns[tgt]
            if tgt2 != i:
                return float("inf")
            for b in comp.basis:
                worst = max(worst, float(np.abs(g(f(b)) - b).max()))
        return worst


def _find_pair(cs: CoproductSystem, k: int) -> int:
    for i, c in enumerate(cs.components):
        if tuple(c.blocks) == (k, k) and c.dim == 2 * k * k:
            return i
    raise MissingBlocks(f"the coproduct has no M{k}+M{k} component")


def nc_factorization(cs: CoproductSystem) -> NcFactorization:
    """``Φ: ℓ∞² ⊕₁ ℓ∞³ -> cs`` by doubled diagonals and ``Ψ`` reading diagonals back."""
    i2, i3 = _find_pair(cs, 2), _find_pair(cs, 3)
    src = coproduct([ell_inf(2), ell_inf(3)], name="linf2*linf3")

    def diag_twice(k):
        return lambda a: np.diag(np.concatenate([np.diag(a), np.diag(a)])).astype(complex)

    def read_diag(k):
        return lambda m: np.diag(np.diag(m[:k, :k])).astype(complex)

    phi_fns = ((i2, diag_twice(2)), (i3, diag_twice(3)))
    psi_fns = []
    for i, c in enumerate(cs.components):
        if i == i2:
            psi_fns.append((0, read_diag(2)))
        elif i == i3:
            psi_fns.append((1, read_diag(3)))
        else:
            psi_fns.append((0, lambda m, a=c.amb: np.trace(m) / a * np.eye(2, dtype=complex)))
    phi = CoproductMap(src, cs, tuple(
        (tgt, map_from_function(src.components[s], cs.components[tgt], f, name=f"phi{s}"))
        for s, (tgt, f) in enumerate(phi_fns)), name="Phi")
    psi = CoproductMap(cs, src, tuple(
        (tgt, map_from_function(cs.components[s], src.components[tgt], f, name=f"psi{s}"))
        for s, (tgt, f) in enumerate(psi_fns)), name="Psi")
    return NcFactorization(src, cs, phi, psi, phi_fns, tuple(psi_fns))


def random_min_positive(cs: CoproductSystem, d: int, rng: np.random.Generator, margin: float = 0.1,
                        level: int = 1, tols: Tolerances | None = None) -> TensorElement:
    """Random element of ``M_n(cs ⊗ M_d)`` whose min-cone margin is exactly ``margin``.

    Each component gets a random hermitian supported on its ambient blocks;
    the unit is then added to the first component to set the margin.
    """
    t = resolve(tols)
    parts = []
    for c in cs.components:
        size = level * c.amb * d
        x = np.zeros((level, c.amb, d, level, c.amb, d), dtype=complex)
        for sl in c.block_slices():
            b = sl.stop - sl.start
            g = rng.standard_normal((level * b * d,) * 2) + 1j * rng.standard_normal((level * b * d,) * 2)
            h = ((g + g.conj().T) / 2).reshape(level, b, d, level, b, d)
            x[:, sl, :, :, sl, :] = h
        parts.append(x.reshape(size, size))
    z = TensorElement(cs, matrix_algebra(d), level, tuple(parts))
    x = CoproductElement(cs, level * d, tuple(z.as_left_level()))
    value, _, _ = shift_value(x, t, cap=1.0)
    if value is None:
        raise NumericalBreakdown("could not measure the min-cone margin")
    shift = margin - value
    parts[0] = parts[0] + shift * np.eye(parts[0].shape[0])
    return TensorElement(cs, z.right, level, tuple(parts))
