"""The dual-coproduct package ``(K, Γ, Λ, ω)``.

For a coproduct of full block algebras ``A_ι`` with weights
``w_ι = 1 / tr(1_ι)``:

* ``K = {(α_ι) : w_ι tr(α_ι) equal for all ι}`` inside ``⊕ A_ι``;
* ``Γ(β)(α) = sum_ι w_ι tr(β_ι α_ι^T)`` pairs the direct sum with itself;
* ``Λ(sum β_ι)(α) = sum_ι |F| w_ι tr(β_ι α_ι^T)`` on ``K``;
* ``ω(α) = sum_ι w_ι tr(α_ι)``, so ``Λ(unit) = ω``.

Level-``n`` functionals on ``K`` are handled as maps ``K -> M_n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import Tolerances, resolve
from ..errors import UnsupportedProfile
from ..numerics.linalg import hermitian_basis
from ..opsys.maps import CpMap
from ..opsys.systems import ConcreteOperatorSystem, make_system, matrix_algebra, split_levels
from .coproduct import CoproductElement, CoproductSystem, coproduct_quotient_realization


@dataclass(eq=False)
class DualCoproductPackage:
    cs: CoproductSystem
    K: ConcreteOperatorSystem
    weights: tuple[float, ...]
    offsets: tuple[int, ...]

    def component(self, alpha: np.ndarray, i: int) -> np.ndarray:
        o = self.offsets
        return alpha[o[i]:o[i + 1], o[i]:o[i + 1]]

    def gamma(self, beta: np.ndarray, alpha: np.ndarray) -> complex:
        """``Γ(β)(α)`` for direct-sum ambient matrices."""
        return complex(sum(w * np.sum(self.component(beta, i) * self.component(alpha, i))
                           for i, w in enumerate(self.weights)))

    def omega(self, alpha: np.ndarray) -> complex:
        return complex(sum(w * np.trace(self.component(alpha, i)) for i, w in enumerate(self.weights)))

    def lam(self, x: CoproductElement) -> CpMap:
        """``Λ_n(x)`` as the map ``K -> M_n``."""
        n = x.level
        f = self.cs.size
        vals = []
        for s in self.K.basis:
            v = np.zeros((n, n), dtype=complex)
            for i, (part, comp) in enumerate(zip(x.parts, self.cs.components)):
                blocks = split_levels(part, n, comp.amb)
                v += f * self.weights[i] * np.einsum("ijab,ab->ij", blocks, self.component(s, i))
            vals.append(v)
        return CpMap(self.K, matrix_algebra(n), tuple(vals), name="Lambda")

    def gamma_map(self, beta: np.ndarray, n: int = 1) -> CpMap:
        """``(Γ ⊗ id_n)(β)`` restricted to ``K``, for a level-``n`` direct-sum element ``β``."""
        amb = self.K.amb
        blocks = split_levels(beta, n, amb)
        vals = []
        for s in self.K.basis:
            v = np.zeros((n, n), dtype=complex)
            for i, w in enumerate(self.weights):
                o0, o1 = self.offsets[i], self.offsets[i + 1]
                v += w * np.einsum("ijab,ab->ij", blocks[:, :, o0:o1, o0:o1], s[o0:o1, o0:o1])
            vals.append(v)
        return CpMap(self.K, matrix_algebra(n), tuple(vals), name="Gamma")


def dual_coproduct(cs: CoproductSystem) -> DualCoproductPackage:
    for c in cs.components:
        if c.dim != sum(b * b for b in c.blocks):
            raise UnsupportedProfile("dual_coproduct needs components that are full block algebras")
    ambs = [c.amb for c in cs.components]
    offsets = tuple(int(v) for v in np.cumsum([0] + ambs))
    total = offsets[-1]
    weights = tuple(1.0 / a for a in ambs)
    blocks = [b for c in cs.components for b in c.blocks]
    basis = [np.eye(total, dtype=complex)]
    for i, c in enumerate(cs.components):
        o = offsets[i]
        # traceless hermitian elements of the component: every basis element
        # except the unit, with its trace removed
        for s in c.basis:
            if c.unit_index >= 0 and s is c.basis[c.unit_index]:
                continue
            m = np.zeros((total, total), dtype=complex)
            m[o:o + c.amb, o:o + c.amb] = s - np.trace(s) / c.amb * np.eye(c.amb)
            basis.append(m)
    K = make_system(blocks, basis, 0, name="K")
    return DualCoproductPackage(cs, K, weights, offsets)


def check_package(pkg: DualCoproductPackage, samples=(), tols: Tolerances | None = None) -> dict:
    """Exact identities of the package.

    * ``Λ(unit) = ω`` on the basis of ``K``;
    * the trace-ratio constraint holds on ``K``'s basis;
    * ``Λ = Γ|_K ∘ Φ`` where ``Φ`` is the quotient realization, on the given
      level-1 coproduct elements and on every unit placement.
    """
    cs = pkg.cs
    out = {}
    unit_map = pkg.lam(cs.unit())
    out["unit_to_omega"] = max(abs(complex(v[0, 0]) - pkg.omega(s)) for v, s in zip(unit_map.values, pkg.K.basis))
    ratios = []
    for s in pkg.K.basis:
        r = [w * np.trace(pkg.component(s, i)) for i, w in enumerate(pkg.weights)]
        ratios.append(max(abs(a - r[0]) for a in r))
    out["trace_ratio"] = float(max(ratios))
    real = coproduct_quotient_realization(cs, tols)
    diag = 0.0
    elems = list(samples) + [cs.embed(i, np.eye(c.amb)) for i, c in enumerate(cs.components)]
    for x in elems:
        lam = pkg.lam(x)
        gam = pkg.gamma_map(real.forward(x), x.level)
        diag = max(diag, max(float(np.abs(a - b).max()) for a, b in zip(lam.values, gam.values)))
    out["diagram"] = diag
    return out
