"""Concrete operator systems inside block-diagonal matrix algebras.

A system is the complex span of a hermitian basis living in the ambient
``M_{b_1} ⊕ ... ⊕ M_{b_r}``, stored as full ``N × N`` block-diagonal
matrices.  Level-``n`` elements use the layout ``sum_ij kron(e_ij, s_ij)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..config import Tolerances, resolve
from ..errors import DependentBasis, InvalidInput, ShapeMismatch, UnitNotInSpan
from ..numerics.linalg import (MembershipVerdict, block_offsets, hermitian, hermitian_basis,
                               off_block_norm, psd_check)


def split_levels(x: np.ndarray, n: int, amb: int) -> np.ndarray:
    """``(n*amb)^2`` matrix to the ``(n, n, amb, amb)`` array of its entries ``x_ij``."""
    return x.reshape(n, amb, n, amb).transpose(0, 2, 1, 3)


def join_levels(parts: np.ndarray) -> np.ndarray:
    n, _, a, _ = parts.shape
    return parts.transpose(0, 2, 1, 3).reshape(n * a, n * a)


@dataclass(eq=False)
class ConcreteOperatorSystem:
    blocks: tuple[int, ...]
    basis: tuple[np.ndarray, ...]
    unit_index: int
    name: str = ""
    _pinv: np.ndarray = field(init=False, repr=False)
    _mat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._mat = np.stack([b.ravel() for b in self.basis], axis=1)
        self._pinv = np.linalg.pinv(self._mat)

    @property
    def amb(self) -> int:
        return sum(self.blocks)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def unit(self) -> np.ndarray:
        return np.eye(self.amb, dtype=complex)

    def coords(self, s: np.ndarray) -> np.ndarray:
        """Complex coordinates of an ambient matrix (least squares)."""
        return self._pinv @ np.asarray(s, dtype=complex).ravel()

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        return (self._mat @ np.asarray(c, dtype=complex)).reshape(self.amb, self.amb)

    def span_residual(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=complex)
        return float(np.abs(self.from_coords(self.coords(s)) - s).max(initial=0.0))

    def level_coords(self, x: np.ndarray, n: int) -> np.ndarray:
        """``(n, n, dim)`` coordinates of a level-``n`` ambient matrix."""
        parts = split_levels(np.asarray(x, dtype=complex), n, self.amb)
        return np.einsum("km,ijm->ijk", self._pinv, parts.reshape(n, n, -1))

    def level_residual(self, x: np.ndarray, n: int) -> float:
        c = self.level_coords(x, n)
        back = np.einsum("mk,ijk->ijm", self._mat, c).reshape(n, n, self.amb, self.amb)
        return float(np.abs(join_levels(back) - x).max(initial=0.0))

    def block_slices(self) -> list[slice]:
        off = block_offsets(self.blocks)
        return [slice(off[j], off[j + 1]) for j in range(len(self.blocks))]

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<ConcreteOperatorSystem{label} blocks={list(self.blocks)} dim={self.dim}>"


def make_system(blocks: Sequence[int], basis: Sequence[np.ndarray], unit=None, *,
                name: str = "", tols: Tolerances | None = None) -> ConcreteOperatorSystem:
    """Validate a hermitian basis over the block ambient ``blocks``.

    ``unit`` is a basis index, an explicit matrix, or ``None``; in every case
    the ambient identity must lie in the span and is the order unit.
    """
    t = resolve(tols)
    blocks = tuple(int(b) for b in blocks)
    if not blocks or any(b < 1 for b in blocks):
        raise InvalidInput("ambient needs at least one block of positive size")
    if len(basis) == 0:
        raise InvalidInput("basis is empty")
    amb = sum(blocks)
    mats = []
    for b in basis:
        h = hermitian(b)
        if h.shape != (amb, amb):
            raise ShapeMismatch(f"basis element of shape {h.shape} does not fit ambient {amb}")
        if off_block_norm(h, 1, blocks) > 0.0:
            raise ShapeMismatch("basis element is not block diagonal for the ambient profile")
        mats.append(h)
    g = np.stack([m.ravel() for m in mats], axis=1)
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
        raise DependentBasis(f"basis has numerical rank below {len(mats)}")
    eye = np.eye(amb)
    if unit is None:
        idx = next((i for i, m in enumerate(mats) if np.array_equal(m, eye)), -1)
    elif isinstance(unit, (int, np.integer)):
        idx = int(unit)
        if not 0 <= idx < len(mats) or np.abs(mats[idx] - eye).max() > t.feas:
            raise UnitNotInSpan(f"basis element {unit} is not the ambient identity")
    else:
        u = hermitian(unit)
        if u.shape != (amb, amb) or np.abs(u - eye).max() > t.feas:
            raise UnitNotInSpan("designated unit is not the ambient identity")
        idx = -1
    system = ConcreteOperatorSystem(blocks, tuple(mats), idx, name)
    if system.span_residual(eye) > max(t.feas, 1e-10):
        raise UnitNotInSpan("the ambient identity is not in the span of the basis")
    return system


# --- standard systems ---------------------------------------------------------

def full_algebra(blocks: Sequence[int], name: str = "") -> ConcreteOperatorSystem:
    """The whole block algebra ``M_{b_1} ⊕ ... ⊕ M_{b_r}`` with the identity first."""
    blocks = tuple(int(b) for b in blocks)
    amb = sum(blocks)
    off = block_offsets(blocks)
    basis = [np.eye(amb, dtype=complex)]
    for j, b in enumerate(blocks):
        for h in hermitian_basis(b):
            m = np.zeros((amb, amb), dtype=complex)
            m[off[j]:off[j + 1], off[j]:off[j + 1]] = h
            basis.append(m)
    # drop the last block's first diagonal unit so the identity keeps the basis independent
    drop = 1 + sum(bb * bb for bb in blocks[:-1])
    del basis[drop]
    return make_system(blocks, basis, 0, name=name or f"M({'+'.join(map(str, blocks))})")


def matrix_algebra(p: int) -> ConcreteOperatorSystem:
    return full_algebra([p], name=f"M{p}")


def ell_inf(k: int) -> ConcreteOperatorSystem:
    return full_algebra([1] * k, name=f"linf{k}")


def direct_sum(systems: Sequence[ConcreteOperatorSystem], name: str = "") -> ConcreteOperatorSystem:
    """Direct sum ``S_1 ⊕ ... ⊕ S_m`` as a subsystem of the concatenated ambient."""
    blocks = tuple(b for s in systems for b in s.blocks)
    amb = sum(blocks)
    basis = [np.eye(amb, dtype=complex)]
    o = 0
    for s in systems:
        a = s.amb
        for k, b in enumerate(s.basis):
            if k == s.unit_index:
                continue
            m = np.zeros((amb, amb), dtype=complex)
            m[o:o + a, o:o + a] = b
            basis.append(m)
        if s.unit_index < 0:
            raise InvalidInput("direct_sum needs components whose unit is a basis element")
        o += a
    # the components' units (minus one) complete the basis
    o = 0
    for s in systems[:-1]:
        m = np.zeros((amb, amb), dtype=complex)
        m[o:o + s.amb, o:o + s.amb] = np.eye(s.amb)
        basis.append(m)
        o += s.amb
    return make_system(blocks, basis, 0, name=name or "(+)".join(s.name for s in systems))


# --- elements -----------------------------------------------------------------

@dataclass(eq=False)
class Element:
    system: ConcreteOperatorSystem
    level: int
    data: np.ndarray

    @property
    def entries(self) -> np.ndarray:
        return split_levels(self.data, self.level, self.system.amb)


def element(system: ConcreteOperatorSystem, data, level: int = 1, *,
            tols: Tolerances | None = None) -> Element:
    t = resolve(tols)
    data = np.asarray(data, dtype=complex)
    size = level * system.amb
    if data.shape != (size, size):
        raise ShapeMismatch(f"level-{level} element needs shape {(size, size)}, got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InvalidInput("element has non-finite entries")
    r = system.level_residual(data, level)
    if r > t.feas * max(1.0, float(np.abs(data).max(initial=0.0))):
        raise InvalidInput(f"data is not in M_{level}(span): projection residual {r:.3e}")
    return Element(system, level, data)


def unit_element(system: ConcreteOperatorSystem, level: int = 1) -> Element:
    return Element(system, level, np.eye(level * system.amb, dtype=complex))


def level_membership(x: Element, tol: float | None = None) -> MembershipVerdict:
    """Positivity in the inherited cone: the ambient matrix is PSD."""
    tol = resolve(None).feas if tol is None else tol
    h = hermitian(x.data, atol=1e-9)
    return psd_check(h, tol)
