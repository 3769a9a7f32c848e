"""Linear maps between concrete systems, Choi calculus, and CP checking.

CP-ness of a map out of a proper subsystem is decided by extension
feasibility: a CP map on the ambient block algebra ``D = ⊕ M_{p_j}`` is a
sum of maps ``M_{p_j} -> M_q`` each with a PSD Choi block, and a map on a
subsystem ``S ⊂ D`` is CP into ``M_q`` iff such a family agrees with it on
``S``.  The infeasible side is certified by an explicit positive level-``q``
element ``x`` of ``S`` whose image pairs negatively with the unnormalised
maximally entangled vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ..config import Tolerances, resolve
from ..errors import InvalidInput, ShapeMismatch, SingularConditioning
from ..numerics.linalg import herm_part, matrix_units
from ..numerics.sdp import Affine, SdpProblem, SdpStatus, max_margin, sdp_solve
from .systems import ConcreteOperatorSystem, join_levels, matrix_algebra, split_levels


@dataclass(eq=False)
class CpMap:
    """Linear map recorded by the images (codomain ambient matrices) of the domain basis."""

    domain: ConcreteOperatorSystem
    codomain: ConcreteOperatorSystem
    values: tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.values) != self.domain.dim:
            raise ShapeMismatch("need one image per domain basis element")
        a = self.codomain.amb
        for v in self.values:
            if v.shape != (a, a):
                raise ShapeMismatch(f"image of shape {v.shape} does not fit codomain ambient {a}")
        self._stack = np.stack(self.values)

    def apply(self, x: np.ndarray, n: int = 1) -> np.ndarray:
        """Image of a level-``n`` domain ambient matrix (coordinates by least squares)."""
        c = self.domain.level_coords(np.asarray(x, dtype=complex), n)
        parts = np.einsum("ijk,kab->ijab", c, self._stack)
        return join_levels(parts)

    def __call__(self, x: np.ndarray, n: int = 1) -> np.ndarray:
        return self.apply(x, n)

    def unit_defect(self) -> float:
        img = self.apply(self.domain.unit)
        return float(np.abs(img - self.codomain.unit).max())

    def is_unital(self, tol: float = 1e-12) -> bool:
        return self.unit_defect() <= tol


def map_from_function(domain: ConcreteOperatorSystem, codomain: ConcreteOperatorSystem,
                      f: Callable[[np.ndarray], np.ndarray], name: str = "") -> CpMap:
    return CpMap(domain, codomain, tuple(np.asarray(f(b), dtype=complex) for b in domain.basis), name)


def compose(psi: CpMap, phi: CpMap) -> CpMap:
    """``psi ∘ phi``."""
    return CpMap(phi.domain, psi.codomain, tuple(psi.apply(v) for v in phi.values),
                 name=f"{psi.name}∘{phi.name}")


def state_map(domain: ConcreteOperatorSystem, density: np.ndarray) -> CpMap:
    """The functional ``a ↦ tr(density · a)`` as a map into ``M_1``."""
    rho = np.asarray(density, dtype=complex)
    return map_from_function(domain, matrix_algebra(1),
                             lambda b: np.array([[np.sum(rho.T * b)]]), name="state")


# --- Choi calculus --------------------------------------------------------------

@dataclass
class ChoiElement:
    """Choi matrix ``sum_ab e_ab ⊗ φ(e_ab)`` of a map ``M_k -> M_q``."""

    k: int
    q: int
    matrix: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return choi_apply(self.matrix, x, self.k, self.q)


def choi_matrix(f: Callable[[np.ndarray], np.ndarray], k: int) -> np.ndarray:
    blocks = [[None] * k for _ in range(k)]
    for a, b, e in matrix_units(k):
        blocks[a][b] = np.asarray(f(e), dtype=complex)
    return np.block(blocks)


def choi_apply(c: np.ndarray, x: np.ndarray, k: int, q: int) -> np.ndarray:
    """``Tr_1[(x^T ⊗ I) C] = sum_ab x_ab C_[a,b]``."""
    return np.einsum("ab,aibj->ij", x, c.reshape(k, q, k, q))


def _choi_apply_affine(c: Affine, x: np.ndarray, k: int, q: int) -> Affine:
    return c.map(lambda m: np.einsum("ab,aibj->ij", x, m.reshape(k, q, k, q)))


def choi_of_map(phi: CpMap) -> np.ndarray:
    """Choi matrix of a map whose domain is a full single matrix algebra."""
    if len(phi.domain.blocks) != 1 or phi.domain.dim != phi.domain.amb ** 2:
        raise InvalidInput("Choi matrix needs a full matrix algebra domain")
    return choi_matrix(phi.apply, phi.domain.amb)


def map_from_choi(c: np.ndarray, k: int, q: int) -> CpMap:
    return map_from_function(matrix_algebra(k), matrix_algebra(q), lambda x: choi_apply(c, x, k, q))


# --- CP checking -------------------------------------------------------------------

class CpStatus(str, Enum):
    CP = "CP"
    NOT_CP = "NotCP"
    UNKNOWN = "Unknown"


@dataclass
class CpVerdict:
    status: CpStatus
    choi_blocks: dict = field(default_factory=dict)
    witness: tuple[int, np.ndarray] | None = None
    witness_value: float = float("nan")
    margin: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def cp(self) -> bool:
        return self.status is CpStatus.CP

    @property
    def not_cp(self) -> bool:
        return self.status is CpStatus.NOT_CP

    def extension(self, phi: CpMap) -> ChoiElement:
        """Full Choi matrix of the extension ``M_P -> M_Q`` (through the block conditional expectation)."""
        dom, cod = phi.domain, phi.codomain
        p, q = dom.amb, cod.amb
        c = np.zeros((p, q, p, q), dtype=complex)
        for (j, l), blk in self.choi_blocks.items():
            sj, sl = dom.block_slices()[j], cod.block_slices()[l]
            pj, ql = sj.stop - sj.start, sl.stop - sl.start
            c[sj, sl, sj, sl] = blk.reshape(pj, ql, pj, ql)
        return ChoiElement(p, q, c.reshape(p * q, p * q))


def _block_values(phi: CpMap, l: int) -> list[np.ndarray]:
    sl = phi.codomain.block_slices()[l]
    return [v[sl, sl] for v in phi.values]


def _extension_problem(phi: CpMap, l: int):
    dom = phi.domain
    vals = _block_values(phi, l)
    ql = vals[0].shape[0]
    p = SdpProblem()
    chois = []
    for j, sj in enumerate(dom.block_slices()):
        pj = sj.stop - sj.start
        chois.append(p.hermitian(f"C{j}", pj * ql))
    for s, v in zip(dom.basis, vals):
        total = Affine(np.zeros((ql, ql), dtype=complex))
        for j, sj in enumerate(dom.block_slices()):
            pj = sj.stop - sj.start
            total = total + _choi_apply_affine(chois[j], s[sj, sj], pj, ql)
        p.add_eq(total, v)
    return p, chois


def verify_extension(phi: CpMap, blocks: dict, tol: float) -> tuple[bool, float]:
    """Independent check: Choi blocks PSD and agreement with ``phi`` on the domain basis."""
    dom, cod = phi.domain, phi.codomain
    worst_eig = np.inf
    worst_res = 0.0
    scale = 1.0 + max(float(np.abs(v).max()) for v in phi.values)
    for l, sl in enumerate(cod.block_slices()):
        ql = sl.stop - sl.start
        for k, s in enumerate(dom.basis):
            img = np.zeros((ql, ql), dtype=complex)
            for j, sj in enumerate(dom.block_slices()):
                img += choi_apply(blocks[(j, l)], s[sj, sj], sj.stop - sj.start, ql)
            worst_res = max(worst_res, float(np.abs(img - phi.values[k][sl, sl]).max()))
        for j in range(len(dom.blocks)):
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(herm_part(blocks[(j, l)]))[0]))
    off = 0.0
    for v in phi.values:
        mask = np.ones_like(v, dtype=bool)
        for sl in cod.block_slices():
            mask[sl, sl] = False
        off = max(off, float(np.abs(v[mask]).max(initial=0.0)))
    ok = worst_eig >= -tol * scale and worst_res <= tol * scale and off <= tol * scale
    return ok, worst_eig


def _witness_for_block(phi: CpMap, l: int, t: Tolerances):
    """Minimise ``sum_k tr(W_k V_k)`` over ``sum_k s_k^T ⊗ W_k ⪰ 0`` (per domain block), trace 1."""
    dom = phi.domain
    vals = _block_values(phi, l)
    ql = vals[0].shape[0]
    p = SdpProblem()
    ws = [p.hermitian(f"W{k}", ql) for k in range(dom.dim)]
    norm = Affine(np.zeros((1, 1), dtype=complex))
    for sj in dom.block_slices():
        pj = sj.stop - sj.start
        x = Affine(np.zeros((pj * ql, pj * ql), dtype=complex))
        for s, w in zip(dom.basis, ws):
            x = x + w.kron(left=s[sj, sj].T)
        p.add_psd(x)
        norm = norm + x.trace()
    p.add_eq(norm, 1.0)
    obj = Affine(np.zeros((1, 1), dtype=complex))
    for w, v in zip(ws, vals):
        obj = obj + w.pair(v)
    p.minimize(obj)
    out = sdp_solve(p, t)
    if not out.has_primal or not out.objective_value < -t.feas:
        return None
    wv = [out[f"W{k}"] for k in range(dom.dim)]
    return _lift_witness(phi, l, wv, t)


def _lift_witness(phi: CpMap, l: int, wv, t: Tolerances):
    """Level-``q_l`` element ``x = sum_k W_k^T ⊗ s_k``, pushed into the cone by a unit shift."""
    dom = phi.domain
    ql = wv[0].shape[0]
    x = sum(np.kron(w.T, s) for w, s in zip(wv, dom.basis))
    x = herm_part(x)
    lam = float(np.linalg.eigvalsh(x)[0])
    if lam < 0:
        x = x - lam * np.eye(x.shape[0])
    return ql, x


def witness_value(phi: CpMap, l: int, level: int, x: np.ndarray) -> float:
    """``<Ω|(φ_level(x))_l|Ω>`` restricted to codomain block ``l`` (non-hermitian images count as failure)."""
    img = phi.apply(x, level)
    sl = phi.codomain.block_slices()[l]
    amb = phi.codomain.amb
    parts = split_levels(img, level, amb)[:, :, sl, sl]
    ql = sl.stop - sl.start
    if level != ql:
        raise ShapeMismatch("witness level must equal the codomain block size")
    return float(np.real(np.einsum("ijij->", parts)))


def verify_witness(phi: CpMap, l: int, level: int, x: np.ndarray, tol: float) -> bool:
    lam = float(np.linalg.eigvalsh(herm_part(x))[0])
    if lam < -1e-12 * max(1.0, float(np.abs(x).max())):
        return False
    if np.abs(x - x.conj().T).max() > 1e-12 * max(1.0, float(np.abs(x).max())):
        return False
    img = phi.apply(x, level)
    if np.abs(img - img.conj().T).max() > tol:
        return True
    return witness_value(phi, l, level, x) < -tol


def cp_check(phi: CpMap, tols: Tolerances | None = None) -> CpVerdict:
    """Decide complete positivity of ``phi`` into its codomain's ambient algebra."""
    t = resolve(tols)
    dom, cod = phi.domain, phi.codomain
    # hermiticity of images: a CP map is self-adjoint
    for k, v in enumerate(phi.values):
        if np.abs(v - v.conj().T).max() > t.feas * max(1.0, float(np.abs(v).max())):
            s = dom.basis[k]
            c = max(1.0, float(np.linalg.norm(s, 2)))
            x = s + c * dom.unit
            return CpVerdict(CpStatus.NOT_CP, witness=(1, x), info={"reason": "image not hermitian"})
    blocks = {}
    margins = []
    stats = []
    for l in range(len(cod.blocks)):
        p, chois = _extension_problem(phi, l)
        max_margin(p, chois)
        out = sdp_solve(p, t)
        stats.append(out.stats)
        if out.has_primal and out.objective_value >= -t.feas:
            for j in range(len(dom.blocks)):
                blocks[(j, l)] = out[f"C{j}"]
            margins.append(out.objective_value)
            continue
        wit = _witness_for_block(phi, l, t)
        if wit is not None and verify_witness(phi, l, wit[0], wit[1], t.feas):
            return CpVerdict(CpStatus.NOT_CP, witness=wit, witness_value=witness_value(phi, l, *wit),
                             info={"block": l, "stats": stats})
        return CpVerdict(CpStatus.UNKNOWN, info={"block": l, "stats": stats,
                                                   "margin": out.objective_value})
    ok, eig = verify_extension(phi, blocks, t.feas)
    if not ok:
        return CpVerdict(CpStatus.UNKNOWN, choi_blocks=blocks, info={"reason": "extension failed verification"})
    return CpVerdict(CpStatus.CP, choi_blocks=blocks, margin=min(margins), info={"stats": stats})


def cp_extend(phi: CpMap, tols: Tolerances | None = None) -> CpVerdict:
    """Arveson extension of ``phi`` to the domain's ambient block algebra.

    On success ``verdict.extension(phi)`` is the Choi matrix of a CP map
    ``M_P -> M_Q`` agreeing with ``phi`` on the domain.
    """
    return cp_check(phi, tols)


# --- matrix duality and unitalization ---------------------------------------------------

def dual_matrix_iso(k: int) -> tuple[CpMap, CpMap]:
    """The trace pairing ``γ_k(α)(β) = tr(α β^T)`` and its inverse.

    A functional ``f`` on ``M_k`` is identified with the matrix ``F`` for which
    ``f(β) = sum_ij F_ij β_ij``; under this identification ``γ_k`` is the
    identity, so both returned maps are the identity of ``M_k``.
    """
    if k < 1:
        raise InvalidInput("k must be positive")
    m = matrix_algebra(k)
    ident = CpMap(m, m, m.basis, name=f"gamma{k}")
    inv = CpMap(m, m, m.basis, name=f"gamma{k}^-1")
    return ident, inv


def functional_of(alpha: np.ndarray) -> Callable[[np.ndarray], complex]:
    a = np.asarray(alpha, dtype=complex)
    return lambda beta: complex(np.sum(a * np.asarray(beta)))


def functional_matrix(f: Callable[[np.ndarray], complex], k: int) -> np.ndarray:
    out = np.zeros((k, k), dtype=complex)
    for a, b, e in matrix_units(k):
        out[a, b] = f(e)
    return out


def unitalize_lift(phi: CpMap, omega: CpMap, h: np.ndarray | None = None,
                   tols: Tolerances | None = None) -> CpMap:
    """Turn a CP map with unit defect ``h = φ(1) - 1`` into a unital CP map.

    ``a ↦ R (φ(a) + ω(a) h⁻) R`` with ``R = (1 + h⁺)^{-1/2}``; ``h⁺`` keeps
    the eigenvalues above ``eig`` tolerance and ``h⁻ = h⁺ - h``.
    """
    t = resolve(tols)
    if len(phi.codomain.blocks) != 1:
        raise InvalidInput("unitalize_lift needs a full matrix algebra codomain")
    if omega.domain is not phi.domain or omega.codomain.amb != 1:
        raise InvalidInput("omega must be a state on the domain of phi")
    defect = phi.apply(phi.domain.unit) - phi.codomain.unit
    if h is None:
        h = defect
    elif np.abs(np.asarray(h) - defect).max() > t.feas:
        raise InvalidInput("h does not equal phi(unit) - unit")
    h = herm_part(np.asarray(h, dtype=complex))
    if np.abs(h).max(initial=0.0) <= t.eig:
        return phi
    lam, vec = np.linalg.eigh(h)
    pos = np.where(lam > t.eig, lam, 0.0)
    h_plus = (vec * pos) @ vec.conj().T
    h_minus = h_plus - h
    lam_r = 1.0 + pos
    if lam_r.min() <= t.cond_floor:
        raise SingularConditioning("1 + h⁺ is too close to singular")
    r = (vec * lam_r ** -0.5) @ vec.conj().T
    w = [complex(v[0, 0]) for v in omega.values]
    values = tuple(r @ (v + wk * h_minus) @ r for v, wk in zip(phi.values, w))
    return CpMap(phi.domain, phi.codomain, values, name=f"unital({phi.name})")
