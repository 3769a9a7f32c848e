"""Coproducts (amalgamated sums identifying the units) of concrete systems.

An element of ``M_n`` of the coproduct is a family ``(x_ι)`` of level-``n``
elements of the components, taken modulo the unit identifications
``N_n = {(α_ι ⊗ 1_ι) : sum α_ι = 0}``.  Positivity follows the shift
criterion: the class is positive iff trace-free-summing shifts ``α_ι``
make every ``x_ι + α_ι ⊗ 1`` positive.  Refutations are compatible
families of states: densities on the components' ambients with equal
partial traces over the ambient.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from ..config import Tolerances, resolve
from ..errors import EmptyFamily, InvalidInput, ShapeMismatch
from ..numerics.linalg import herm_part, hermitian, partial_trace
from ..numerics.sdp import Affine, SdpProblem, sdp_solve
from ..opsys.maps import CpMap, CpStatus, cp_check
from ..opsys.systems import ConcreteOperatorSystem, direct_sum


@dataclass(eq=False)
class CoproductSystem:
    components: tuple[ConcreteOperatorSystem, ...]
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return sum(c.dim for c in self.components) - (self.size - 1)

    def zero(self, level: int = 1) -> "CoproductElement":
        return CoproductElement(self, level, tuple(
            np.zeros((level * c.amb, level * c.amb), dtype=complex) for c in self.components))

    def unit(self, level: int = 1) -> "CoproductElement":
        """The order unit, represented at the first component."""
        return self.embed(0, np.eye(level * self.components[0].amb, dtype=complex), level)

    def embed(self, i: int, x: np.ndarray, level: int = 1) -> "CoproductElement":
        parts = list(self.zero(level).parts)
        parts[i] = np.asarray(x, dtype=complex)
        return CoproductElement(self, level, tuple(parts))

    def element(self, parts: Sequence[np.ndarray], level: int = 1) -> "CoproductElement":
        if len(parts) != self.size:
            raise ShapeMismatch(f"need {self.size} component parts, got {len(parts)}")
        out = []
        for c, p in zip(self.components, parts):
            p = np.asarray(p, dtype=complex)
            if p.shape != (level * c.amb, level * c.amb):
                raise ShapeMismatch(f"component part of shape {p.shape} does not fit level {level}")
            if c.level_residual(p, level) > 1e-8 * max(1.0, float(np.abs(p).max(initial=0.0))):
                raise InvalidInput("component part is not in the component's span")
            out.append(p)
        return CoproductElement(self, level, tuple(out))

    def class_residual(self, x: "CoproductElement") -> tuple[float, list[np.ndarray]]:
        """Distance of ``x`` from ``N_n``: least-squares fit of ``(c_ι ⊗ 1)`` with ``sum c_ι = 0``."""
        n = x.level
        blocks = [x.parts[i].reshape(n, c.amb, n, c.amb) for i, c in enumerate(self.components)]
        # unconstrained fit per component is the normalised partial trace; then
        # minimise sum amb_ι |c_ι - fit_ι|^2 subject to sum c = 0
        fits = [np.einsum("iaja->ij", b) / c.amb for b, c in zip(blocks, self.components)]
        weights = np.array([c.amb for c in self.components], dtype=float)
        lam = sum(fits) / np.sum(1.0 / weights)
        cs = [f - lam / w for f, w in zip(fits, weights)]
        res = 0.0
        for p, c, comp in zip(x.parts, cs, self.components):
            res = max(res, float(np.abs(p - np.kron(c, np.eye(comp.amb))).max(initial=0.0)))
        return res, cs

    def unit_residual(self, x: "CoproductElement") -> tuple[float, float]:
        """Write ``x ≈ δ·unit + (c_ι ⊗ 1)`` with ``sum c_ι = 0``; return ``(residual, δ)``."""
        n = x.level
        blocks = [x.parts[i].reshape(n, c.amb, n, c.amb) for i, c in enumerate(self.components)]
        fits = [np.einsum("iaja->ij", b) / c.amb for b, c in zip(blocks, self.components)]
        weights = np.array([c.amb for c in self.components], dtype=float)
        total = sum(fits)
        delta = float(np.real(np.trace(total))) / n
        lam = (total - delta * np.eye(n)) / np.sum(1.0 / weights)
        res = 0.0
        for i, (p, f, comp) in enumerate(zip(x.parts, fits, self.components)):
            c = f - lam / weights[i]
            res = max(res, float(np.abs(p - np.kron(c, np.eye(comp.amb))).max(initial=0.0)))
        return res, delta

    def __repr__(self) -> str:
        return f"<CoproductSystem {' ⊕₁ '.join(c.name or '?' for c in self.components)}>"


@dataclass(eq=False)
class CoproductElement:
    system: CoproductSystem
    level: int
    parts: tuple[np.ndarray, ...]

    def __add__(self, other: "CoproductElement") -> "CoproductElement":
        return CoproductElement(self.system, self.level, tuple(a + b for a, b in zip(self.parts, other.parts)))

    def __sub__(self, other: "CoproductElement") -> "CoproductElement":
        return CoproductElement(self.system, self.level, tuple(a - b for a, b in zip(self.parts, other.parts)))

    def __mul__(self, s) -> "CoproductElement":
        return CoproductElement(self.system, self.level, tuple(s * a for a in self.parts))

    __rmul__ = __mul__

    def shifted(self, t: float) -> "CoproductElement":
        """``x + t · unit``."""
        return self + t * self.system.unit(self.level)


def coproduct(components: Sequence[ConcreteOperatorSystem], name: str = "") -> CoproductSystem:
    if len(components) == 0:
        raise EmptyFamily("a coproduct needs at least one component")
    return CoproductSystem(tuple(components), name)


# --- membership ---------------------------------------------------------------------

class CoproductStatus(str, Enum):
    MEMBER = "Member"
    REFUTED = "Refuted"
    UNKNOWN = "Unknown"


@dataclass
class CoproductVerdict:
    status: CoproductStatus
    value: float = float("nan")
    shifts: list[np.ndarray] | None = None
    family: list[np.ndarray] | None = None
    info: dict = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.status is CoproductStatus.MEMBER

    @property
    def refuted(self) -> bool:
        return self.status is CoproductStatus.REFUTED


def _shift_problem(x: CoproductElement, cap: float):
    cs = x.system
    n, m = x.level, cs.size
    p = SdpProblem()
    s = p.real("s")
    alphas = [p.hermitian(f"a{i}", n) for i in range(m - 1)]
    last = Affine(np.zeros((n, n), dtype=complex))
    for a in alphas:
        last = last - a
    alphas.append(last)
    for part, a, comp in zip(x.parts, alphas, cs.components):
        size = part.shape[0]
        p.add_psd(Affine.constant(herm_part(part)) + a.kron(right=np.eye(comp.amb))
                  - s.expand(np.eye(size) / m))
    p.add_psd(Affine.constant(np.array([[cap]])) - s)
    p.maximize(s)
    return p, alphas


def shift_value(x: CoproductElement, tols: Tolerances | None = None, cap: float = 1.0):
    """Largest ``s`` with ``x - s·unit`` in the coproduct cone (capped), and the shifts attaining it."""
    t = resolve(tols)
    p, alphas = _shift_problem(x, cap)
    out = sdp_solve(p, t)
    if not out.has_primal:
        return None, None, out
    shifts = [a.value(out.y) for a in alphas]
    return out.objective_value, [herm_part(a) for a in shifts], out


# round-off guard for the verifiers; both sides are checked against exact
# inequalities so that a shift certificate and a refuting family can never
# both pass on the same element
ROUND = 1e-12


def _scale(x: CoproductElement) -> float:
    return 1.0 + max(float(np.linalg.norm(p, 2)) for p in x.parts)


def recenter(shifts: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Shifts moved by their common mean so that they sum to zero."""
    mean = sum(shifts) / len(shifts)
    return [herm_part(a - mean) for a in shifts]


def verify_shifts(x: CoproductElement, shifts: Sequence[np.ndarray], eps: float,
                  tol: float = ROUND) -> bool:
    """``sum α = 0`` (to ``tol``) and every ``x_ι + (ε/m) I + α_ι ⊗ 1`` has nonnegative spectrum."""
    cs = x.system
    m = cs.size
    if np.abs(sum(shifts)).max() > tol * _scale(x):
        return False
    for part, a, comp in zip(x.parts, shifts, cs.components):
        mat = herm_part(part) + (eps / m) * np.eye(part.shape[0]) + np.kron(a, np.eye(comp.amb))
        if np.linalg.eigvalsh(mat)[0] < 0:
            return False
    return True


def family_value(x: CoproductElement, family: Sequence[np.ndarray]) -> float:
    return float(sum(np.real(np.sum(r.T * part)) for r, part in zip(family, x.parts)))


def verify_family(x: CoproductElement, family: Sequence[np.ndarray], eps: float,
                  tol: float = ROUND) -> bool:
    """Compatible family of states with ``sum ω_ι(x_ι) < -ε`` by more than the round-off guard."""
    cs = x.system
    n = x.level
    corners = []
    for r, comp in zip(family, cs.components):
        if np.linalg.eigvalsh(herm_part(r))[0] < -tol:
            return False
        corners.append(partial_trace(r, [n, comp.amb], [0]))
        if abs(np.trace(r) - 1.0) > tol:
            return False
    for c in corners[1:]:
        if np.abs(c - corners[0]).max() > tol:
            return False
    guard = 10 * cs.size * tol * _scale(x) * max(p.shape[0] for p in x.parts)
    return family_value(x, family) < -eps - guard


def repair_family(x: CoproductElement, family: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Make approximate solver states exactly compatible, PSD and normalised.

    Corners are moved to their average, then the family is mixed with the
    maximally mixed compatible family just enough to restore positivity.
    """
    cs = x.system
    n = x.level
    fam = [herm_part(r) for r in family]
    corners = [partial_trace(r, [n, c.amb], [0]) for r, c in zip(fam, cs.components)]
    avg = sum(corners) / len(corners)
    fam = [r + np.kron(avg - c, np.eye(comp.amb) / comp.amb)
           for r, c, comp in zip(fam, corners, cs.components)]
    tr = float(np.real(np.trace(avg)))
    fam = [r / tr for r in fam]
    low = min(float(np.linalg.eigvalsh(r)[0]) for r in fam)
    if low < 0:
        # mixing with I/(n·a) adds θ/(n·a) to every eigenvalue
        theta = min(1.0, 2 * -low * max(n * c.amb for c in cs.components))
        fam = [(1 - theta) * r + theta * np.eye(r.shape[0]) / r.shape[0] for r in fam]
    return fam


def refute(x: CoproductElement, eps: float = 0.0, tols: Tolerances | None = None):
    """Minimise ``sum tr(ρ_ι x_ι)`` over compatible families of states."""
    t = resolve(tols)
    cs = x.system
    n = x.level
    p = SdpProblem()
    rhos = [p.hermitian(f"r{i}", part.shape[0]) for i, part in enumerate(x.parts)]
    for r in rhos:
        p.add_psd(r)
    corner = [r.map(lambda m, a=comp.amb: partial_trace(m, [n, a], [0]))
              for r, comp in zip(rhos, cs.components)]
    for c in corner[1:]:
        p.add_eq(c - corner[0], 0.0)
    p.add_eq(rhos[0].trace(), 1.0)
    obj = Affine(np.zeros((1, 1), dtype=complex))
    for r, part in zip(rhos, x.parts):
        obj = obj + r.pair(herm_part(part))
    p.minimize(obj)
    out = sdp_solve(p, t)
    if not out.has_primal:
        return None, out
    fam = repair_family(x, [out[f"r{i}"] for i in range(cs.size)])
    if verify_family(x, fam, eps):
        return fam, out
    return None, out


def coproduct_membership(x: CoproductElement, eps: float = 0.0,
                         tols: Tolerances | None = None) -> CoproductVerdict:
    """Decide whether ``x + ε·unit`` lies in the coproduct cone at level ``x.level``.

    ``Member`` carries shifts ``α_ι`` (summing to zero) with
    ``x_ι + (ε/|F|) I + α_ι ⊗ 1 ⪰ 0``; ``Refuted`` carries a compatible
    family of states with ``sum ω_ι(x_ι) < -ε``.  Inside a band of width
    ``2·feas`` around the boundary the answer is ``Unknown``.
    """
    t = resolve(tols)
    if eps < 0:
        raise InvalidInput("eps must be nonnegative")
    scale = max(1.0, max(float(np.abs(p).max(initial=0.0)) for p in x.parts))
    for p in x.parts:
        hermitian(p, atol=1e-9)
    value, shifts, out = shift_value(x, t, cap=scale)
    if shifts is not None:
        shifts = recenter(shifts)
    info = {"stats": out.stats}
    if value is None:
        return CoproductVerdict(CoproductStatus.UNKNOWN, info=info)
    if value >= -eps + t.feas:
        # prefer the trivial certificate when it already works
        zeros = [np.zeros((x.level, x.level), dtype=complex)] * x.system.size
        if verify_shifts(x, zeros, eps):
            shifts = zeros
        if verify_shifts(x, shifts, eps):
            return CoproductVerdict(CoproductStatus.MEMBER, value, shifts=shifts, info=info)
        return CoproductVerdict(CoproductStatus.UNKNOWN, value, info={**info, "reason": "shift verification"})
    if value <= -eps - t.feas:
        fam, _ = refute(x, eps, t)
        if fam is not None:
            return CoproductVerdict(CoproductStatus.REFUTED, family_value(x, fam), family=fam, info=info)
    return CoproductVerdict(CoproductStatus.UNKNOWN, value, info=info)


# --- maps between coproducts --------------------------------------------------------

@dataclass(eq=False)
class CoproductMap:
    """Unital map out of a coproduct given componentwise.

    ``parts[ι] = (target_index, map)``: the component ``ι`` is sent by ``map``
    into component ``target_index`` of ``codomain`` (a coproduct), or into the
    codomain itself when it is a concrete system (``target_index`` ignored).
    """

    domain: CoproductSystem
    codomain: object
    parts: tuple[tuple[int, CpMap], ...]
    name: str = ""

    def apply(self, x: CoproductElement):
        n = x.level
        if isinstance(self.codomain, CoproductSystem):
            out = self.codomain.zero(n)
            parts = list(out.parts)
            for (tgt, f), xp in zip(self.parts, x.parts):
                parts[tgt] = parts[tgt] + f.apply(xp, n)
            return CoproductElement(self.codomain, n, tuple(parts))
        return sum(f.apply(xp, n) for (_, f), xp in zip(self.parts, x.parts))

    def unit_defect(self) -> float:
        return max(f.unit_defect() for _, f in self.parts)

    def check(self, tols: Tolerances | None = None) -> dict:
        """Verify every component map unital and CP (the coproduct's universal property)."""
        verdicts = [cp_check(f, tols) for _, f in self.parts]
        return {
            "unital": self.unit_defect() <= 1e-12,
            "cp": all(v.status is CpStatus.CP for v in verdicts),
            "verdicts": verdicts,
        }


def compose_coproduct_maps(psi: CoproductMap, phi: CoproductMap) -> CoproductMap:
    """``psi ∘ phi`` for ``phi`` landing in the coproduct ``psi`` starts from."""
    from ..opsys.maps import compose
    parts = []
    for tgt, f in phi.parts:
        tgt2, g = psi.parts[tgt]
        parts.append((tgt2, compose(g, f)))
    return CoproductMap(phi.domain, psi.codomain, tuple(parts), name=f"{psi.name}∘{phi.name}")


def classes_equal(a: CoproductElement, b: CoproductElement, tol: float = 1e-12) -> bool:
    res, _ = a.system.class_residual(a - b)
    return res <= tol


# --- quotient realization of a finite coproduct ------------------------------------

@dataclass(eq=False)
class Realization:
    """``S_1 ⊕ ... ⊕ S_m`` with the unit-difference kernel ``N`` and the isomorphism ``Φ``."""

    cs: CoproductSystem
    parent: ConcreteOperatorSystem
    kernel: object  # KernelSubspace
    offsets: list[int]

    def forward(self, x: CoproductElement) -> np.ndarray:
        """``Φ(sum x_i) = m·(x_i) + N`` as a level-``n`` representative in the parent."""
        n, m = x.level, self.cs.size
        amb = self.parent.amb
        out = np.zeros((n * amb, n * amb), dtype=complex)
        o = 0
        for part, comp in zip(x.parts, self.cs.components):
            a = comp.amb
            for i in range(n):
                for j in range(n):
                    out[i * amb + o:i * amb + o + a, j * amb + o:j * amb + o + a] = \
                        m * part[i * a:(i + 1) * a, j * a:(j + 1) * a]
            o += a
        return out

    def backward(self, y: np.ndarray, n: int = 1) -> CoproductElement:
        """``Φ⁻¹(y + N) = sum y_i / m``."""
        m = self.cs.size
        amb = self.parent.amb
        parts = []
        o = 0
        for comp in self.cs.components:
            a = comp.amb
            idx = np.concatenate([np.arange(o, o + a) + i * amb for i in range(n)])
            parts.append(y[np.ix_(idx, idx)] / m)
            o += a
        return CoproductElement(self.cs, n, tuple(parts))


def tensor_slot_map(parent: ConcreteOperatorSystem, components: Sequence[ConcreteOperatorSystem]) -> CpMap:
    """The unital CP map ``(x_i) ↦ (1/m) sum_i 1⊗..⊗x_i⊗..⊗1``; its null space is ``N``."""
    from ..opsys.systems import make_system
    m = len(components)
    ambs = [c.amb for c in components]

    def slot(i, s):
        out = np.ones((1, 1), dtype=complex)
        for j, a in enumerate(ambs):
            out = np.kron(out, s if j == i else np.eye(a))
        return out

    total = int(np.prod(ambs))
    basis = [np.eye(total, dtype=complex)]
    for i, c in enumerate(components):
        for k, b in enumerate(c.basis):
            if k != c.unit_index:
                basis.append(slot(i, b))
    blocks = [total]
    codomain = make_system(blocks, basis, 0, name="tensor-slots")
    offs = np.cumsum([0] + ambs)

    def f(x):
        return sum(slot(i, x[offs[i]:offs[i + 1], offs[i]:offs[i + 1]]) for i in range(m)) / m

    from ..opsys.maps import map_from_function
    return map_from_function(parent, codomain, f, name="slot-average")


def coproduct_quotient_realization(cs: CoproductSystem, tols: Tolerances | None = None) -> Realization:
    from .quotient import KernelSubspace, make_kernel
    parent = direct_sum(cs.components)
    amb = parent.amb
    offsets = list(np.cumsum([0] + [c.amb for c in cs.components]))
    units = []
    for i, c in enumerate(cs.components):
        u = np.zeros((amb, amb), dtype=complex)
        u[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] = np.eye(c.amb)
        units.append(u)
    span = [units[0] - units[i] for i in range(1, cs.size)]
    provenance = tensor_slot_map(parent, cs.components)
    kernel = make_kernel(parent, span, provenance, tols)
    return Realization(cs, parent, kernel, offsets)
