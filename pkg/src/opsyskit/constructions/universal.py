"""Universal quotients out of coproducts of matrix pairs, padding maps, and the
matrix-pair model of the affine-function system.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..config import Tolerances, resolve
from ..errors import InvalidInput, NotContraction, SpanDeficit
from ..numerics.linalg import herm_part, hermitian
from ..numerics.sdp import Affine, SdpProblem, max_margin, sdp_solve
from ..opsys.maps import CpMap, map_from_function
from ..opsys.systems import ConcreteOperatorSystem, full_algebra, make_system, split_levels
from .coproduct import CoproductElement, CoproductMap, CoproductSystem, coproduct


def pair_algebra(k: int) -> ConcreteOperatorSystem:
    """``M_k ⊕ M_k``."""
    return full_algebra([k, k], name=f"M{k}+M{k}")


def _pair_parts(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    return x[:k, :k], x[k:, k:]


@dataclass(eq=False)
class UniversalQuotient:
    target: ConcreteOperatorSystem
    cs: CoproductSystem
    phi: CoproductMap
    generators: tuple[tuple[int, np.ndarray], ...]
    norms: tuple[float, ...]

    def lift(self, i: int) -> CoproductElement:
        """Canonical positive preimage of generator ``i``: ``‖x‖·k·(0, sum E_ab ⊗ E_ab)`` at component ``i``."""
        k, _ = self.generators[i]
        comp = self.cs.components[i]
        amb = comp.amb
        p = np.zeros((k * amb, k * amb), dtype=complex)
        for a in range(k):
            for b in range(k):
                p[a * amb + k + a, b * amb + k + b] = 1.0
        return self.cs.embed(i, self.norms[i] * k * p, k)

    def lift_general(self, y: np.ndarray, level: int, eps: float = 1e-6,
                     tols: Tolerances | None = None):
        """Preimage ``P`` of a positive level-``n`` target with ``P + ε·unit`` in the coproduct cone.

        Shifts are absorbed into the representatives since every component map
        is unital; returns ``None`` if the SDP does not certify a lift.
        """
        t = resolve(tols)
        n = level
        y = hermitian(y, atol=1e-9)
        p = SdpProblem()
        parts = [p.hermitian(f"P{i}", n * c.amb) for i, c in enumerate(self.cs.components)]
        image = Affine(np.zeros_like(y))
        for (_, f), part in zip(self.phi.parts, parts):
            image = image + part.map(lambda m, f=f: f.apply(m, n))
        p.add_eq(image, y)
        m = self.cs.size
        max_margin(p, [part + (eps / m) * np.eye(part.shape[0]) for part in parts],
                   cap=max(1.0, float(np.abs(y).max())))
        out = sdp_solve(p, t)
        if not out.has_primal or out.objective_value < -t.feas:
            return None
        return CoproductElement(self.cs, n, tuple(herm_part(out[f"P{i}"]) for i in range(m)))


def universal_quotient(target: ConcreteOperatorSystem, generators: Sequence[tuple[int, np.ndarray]],
                       tols: Tolerances | None = None) -> UniversalQuotient:
    """Unital CP surjection from ``⊕₁ (M_k ⊕ M_k)`` onto ``target``.

    Each generator is a positive contraction ``x ∈ M_k(target)``; it is used
    normalised to norm one, and component ``ι`` maps by
    ``ψ(A, B) = (1/k)[tr(A)·1 + sum_ij (B - A)_ij x̂_ij]``.
    """
    t = resolve(tols)
    if not generators:
        raise InvalidInput("need at least one generator")
    comps, parts, gens, norms = [], [], [], []
    amb = target.amb
    for idx, (k, x) in enumerate(generators):
        x = hermitian(x, atol=1e-9)
        if x.shape != (k * amb, k * amb) or target.level_residual(x, k) > t.feas:
            raise InvalidInput(f"generator {idx} is not a level-{k} element of the target")
        lam = np.linalg.eigvalsh(x)
        if lam[0] < -t.feas:
            raise InvalidInput(f"generator {idx} is not positive")
        if lam[-1] > 1 + t.feas:
            raise NotContraction(f"generator {idx} has norm {lam[-1]:.6g} > 1")
        if lam[-1] <= t.feas:
            raise InvalidInput(f"generator {idx} is zero")
        norm = float(lam[-1])
        xs = split_levels(x / norm, k, amb)
        comp = pair_algebra(k)

        def psi(m, k=k, xs=xs):
            a, b = _pair_parts(m, k)
            return (np.trace(a) * np.eye(amb) + np.einsum("ij,ijab->ab", b - a, xs)) / k

        comps.append(comp)
        parts.append((0, map_from_function(comp, target, psi, name=f"psi{idx}")))
        gens.append((k, x))
        norms.append(norm)
    # surjectivity: the unit and all generator entries span the target
    entries = [np.eye(amb, dtype=complex).ravel()]
    for k, x in gens:
        for blk in split_levels(x, k, amb).reshape(k * k, amb, amb):
            entries.append(blk.ravel())
    if np.linalg.matrix_rank(np.stack(entries, axis=1), tol=1e-9) < target.dim:
        raise SpanDeficit("generator entries and the unit do not span the target")
    cs = coproduct(comps, name="universal")
    phi = CoproductMap(cs, target, tuple(parts), name="Phi")
    return UniversalQuotient(target, cs, phi, tuple(gens), tuple(norms))


# --- padding ---------------------------------------------------------------------------

@dataclass(eq=False)
class PadFactorization:
    a: int
    k: int
    J: CpMap
    Q: CpMap
    j_fn: Callable[[np.ndarray], np.ndarray]
    q_fn: Callable[[np.ndarray], np.ndarray]

    def roundtrip_defect(self) -> float:
        """``max |Q(J(b)) - b|`` over the basis, evaluated on the defining formulas."""
        return max(float(np.abs(self.q_fn(self.j_fn(b)) - b).max()) for b in self.J.domain.basis)


def pad_factorization(a: int, k: int, density: tuple[np.ndarray, np.ndarray] | None = None) -> PadFactorization:
    """``J(A1, A2) = (A1 ⊕ ω(A)I, A2 ⊕ ω(A)I)`` into ``M_k ⊕ M_k`` and the corner map back.

    ``density`` gives the state ``ω(A1, A2) = tr(ρ1 A1) + tr(ρ2 A2)``; the
    default is the normalised trace.
    """
    if not 1 <= a <= k:
        raise InvalidInput("need 1 <= a <= k")
    if density is None:
        density = (np.eye(a) / (2 * a), np.eye(a) / (2 * a))
    r1, r2 = (hermitian(r) for r in density)
    if min(np.linalg.eigvalsh(r1)[0], np.linalg.eigvalsh(r2)[0]) < 0 or \
            abs(np.trace(r1) + np.trace(r2) - 1) > 1e-12:
        raise InvalidInput("density must define a state")
    small, big = pair_algebra(a), pair_algebra(k)
    pad = k - a

    def jmap(m):
        a1, a2 = _pair_parts(m, a)
        w = np.sum(r1.T * a1) + np.sum(r2.T * a2)
        out = np.zeros((2 * k, 2 * k), dtype=complex)
        out[:a, :a] = a1
        out[a:k, a:k] = w * np.eye(pad)
        out[k:k + a, k:k + a] = a2
        out[k + a:, k + a:] = w * np.eye(pad)
        return out

    def qmap(m):
        b1, b2 = _pair_parts(m, k)
        out = np.zeros((2 * a, 2 * a), dtype=complex)
        out[:a, :a] = b1[:a, :a]
        out[a:, a:] = b2[:a, :a]
        return out

    J = map_from_function(small, big, jmap, name=f"J{a},{k}")
    Q = map_from_function(big, small, qmap, name=f"Q{k},{a}")
    return PadFactorization(a, k, J, Q, jmap, qmap)


# --- matrix-pair model ----------------------------------------------------------------------

@dataclass(eq=False)
class MatrixPairModel:
    """``span{α⊗1 + β⊗t}`` sampled on a grid of ``[0, 1]`` and its isomorphism with ``M_k ⊕ M_k``."""

    k: int
    grid: np.ndarray
    system: ConcreteOperatorSystem
    pair: ConcreteOperatorSystem
    forward: CpMap   # α⊗1 + β⊗t ↦ (α, α+β)
    backward: CpMap  # (A, B) ↦ (1-t)A + tB


def affine_element(alpha: np.ndarray, beta: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Block-diagonal matrix with blocks ``α + t β`` over the grid."""
    from ..numerics.linalg import block_diag
    return block_diag([alpha + t * beta for t in grid])


def matrix_pair_system(k: int, grid: Sequence[float] = (0.0, 0.5, 1.0)) -> MatrixPairModel:
    grid = np.asarray(grid, dtype=float)
    if grid.min() != 0.0 or grid.max() != 1.0:
        raise InvalidInput("grid must contain both endpoints")
    g = len(grid)
    basis = []
    from ..numerics.linalg import hermitian_basis
    hb = hermitian_basis(k)
    zero = np.zeros((k, k))
    for h in hb:
        basis.append(affine_element(h, zero, grid))
    for h in hb:
        basis.append(affine_element(zero, h, grid))
    system = make_system([k] * g, basis, np.eye(k * g), name=f"c{k}")
    pair = pair_algebra(k)
    i0, i1 = int(np.argmin(grid)), int(np.argmax(grid))

    def fwd(m):
        out = np.zeros((2 * k, 2 * k), dtype=complex)
        out[:k, :k] = m[i0 * k:(i0 + 1) * k, i0 * k:(i0 + 1) * k]
        out[k:, k:] = m[i1 * k:(i1 + 1) * k, i1 * k:(i1 + 1) * k]
        return out

    def bwd(m):
        a, b = _pair_parts(m, k)
        return affine_element(a, b - a, grid)

    return MatrixPairModel(k, grid, system,
                           pair, map_from_function(system, pair, fwd, "forward"),
                           map_from_function(pair, system, bwd, "backward"))
