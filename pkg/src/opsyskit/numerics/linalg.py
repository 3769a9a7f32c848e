"""Hermitian linear algebra primitives.

Matrices are plain complex ``numpy`` arrays.  ``hermitian`` is the only
gate through which external data enters; everything downstream assumes its
output is exactly self-adjoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from ..errors import InvalidInput, NotHermitian, ShapeMismatch


def hermitian(a, *, atol: float = 1e-12, strict: bool = False) -> np.ndarray:
    """Validate ``a`` as a hermitian matrix and return an exactly hermitian copy.

    With ``strict`` the input must already equal its adjoint entry by entry.
    Otherwise asymmetry up to ``atol * max(1, |a|)`` is symmetrized away and
    anything larger raises :class:`NotHermitian`.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    gap = np.abs(a - a.conj().T).max(initial=0.0)
    if strict and gap != 0.0:
        raise NotHermitian(f"matrix differs from its adjoint by {gap:.3e}")
    if gap > atol * max(1.0, np.abs(a).max(initial=0.0)):
        raise NotHermitian(f"matrix differs from its adjoint by {gap:.3e}")
    h = 0.5 * (a + a.conj().T)
    np.fill_diagonal(h, h.diagonal().real)
    return h


def herm_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def min_eigenvalue(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of a hermitian matrix and a unit eigenvector for it."""
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise InvalidInput("matrix has non-finite entries")
    if h.size == 0:
        return np.inf, np.zeros(0, dtype=complex)
    w, v = np.linalg.eigh(herm_part(h))
    return float(w[0]), v[:, 0]


class Status(str, Enum):
    MEMBER = "Member"
    NON_MEMBER = "NonMember"
    UNKNOWN = "Unknown"


@dataclass
class MembershipVerdict:
    """Outcome of a cone-membership query.

    ``margin`` is the certified slack (smallest eigenvalue or SDP optimum),
    ``witness`` a refuting vector/state when the status is ``NON_MEMBER``,
    and ``certificate`` whatever data proves membership.
    """

    status: Status
    margin: float = float("nan")
    witness: Any = None
    certificate: Any = None
    info: dict = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.status is Status.MEMBER

    @property
    def non_member(self) -> bool:
        return self.status is Status.NON_MEMBER

    @property
    def unknown(self) -> bool:
        return self.status is Status.UNKNOWN


def psd_check(h: np.ndarray, tol: float = 0.0) -> MembershipVerdict:
    if tol < 0:
        raise InvalidInput("tol must be nonnegative")
    lam, vec = min_eigenvalue(h)
    if lam >= -tol:
        return MembershipVerdict(Status.MEMBER, margin=lam)
    return MembershipVerdict(Status.NON_MEMBER, margin=lam, witness=vec)


def complex_to_real(h: np.ndarray) -> np.ndarray:
    """Real symmetric doubling ``[[Re, -Im], [Im, Re]]`` of a hermitian matrix."""
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def real_to_complex_dual(z: np.ndarray) -> np.ndarray:
    """Hermitian ``Z`` with ``Re tr(Z A) = <z, complex_to_real(A)>`` for hermitian ``A``.

    ``Z`` is the compression ``V* z V`` with ``V = [I; -iI]``, so ``z >= 0``
    implies ``Z >= 0``.
    """
    m = z.shape[0] // 2
    z11, z12, z21, z22 = z[:m, :m], z[:m, m:], z[m:, :m], z[m:, m:]
    return herm_part((z11 + z22) + 1j * (z21 - z12))


# --- block bookkeeping -------------------------------------------------------

def block_offsets(blocks: Sequence[int]) -> list[int]:
    out = [0]
    for b in blocks:
        out.append(out[-1] + int(b))
    return out


def block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=complex)
    o = 0
    for m in mats:
        k = m.shape[0]
        out[o:o + k, o:o + k] = m
        o += k
    return out


def level_block(x: np.ndarray, n: int, amb: int, lo: int, hi: int) -> np.ndarray:
    """Compress a level-``n`` element (layout ``M_n ⊗ ambient``) to ambient rows ``lo:hi``."""
    idx = np.concatenate([np.arange(lo, hi) + i * amb for i in range(n)])
    return x[np.ix_(idx, idx)]


def level_blocks(x: np.ndarray, n: int, blocks: Sequence[int]) -> list[np.ndarray]:
    """Split a level-``n`` element over a block-diagonal ambient into its block compressions."""
    off = block_offsets(blocks)
    amb = off[-1]
    return [level_block(x, n, amb, off[j], off[j + 1]) for j in range(len(blocks))]


def off_block_norm(x: np.ndarray, n: int, blocks: Sequence[int]) -> float:
    """Largest entry of a level-``n`` element outside the ambient block pattern."""
    off = block_offsets(blocks)
    amb = off[-1]
    lab = np.empty(amb, dtype=int)
    for j in range(len(blocks)):
        lab[off[j]:off[j + 1]] = j
    lab = np.tile(lab, n)
    mask = lab[:, None] != lab[None, :]
    return float(np.abs(x[mask]).max(initial=0.0))


def swap_factors(x: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator on ``⊗ C^{dims[i]}``.

    ``perm`` lists the old factor positions in their new order.
    """
    dims = list(dims)
    k = len(dims)
    t = x.reshape(dims + dims)
    axes = list(perm) + [p + k for p in perm]
    n = int(np.prod(dims))
    return t.transpose(axes).reshape(n, n)


def partial_trace(x: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor not listed in ``keep``."""
    dims = list(dims)
    k = len(dims)
    t = x.reshape(dims + dims)
    traced = [i for i in range(k) if i not in keep]
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    m = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(m, m)


def matrix_units(d: int) -> list[tuple[int, int, np.ndarray]]:
    out = []
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            out.append((a, b, e))
    return out


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) real basis of the ``d × d`` hermitian matrices."""
    out = []
    r = 1.0 / np.sqrt(2.0)
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    for k in range(d):
        for l in range(k + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[k, l] = s[l, k] = r
            out.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[k, l] = 1j * r
            a[l, k] = -1j * r
            out.append(a)
    return out


def op_norm(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * herm_part(g) / np.sqrt(2 * d)


def random_psd(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    return herm_part(g @ g.conj().T) / max(r, 1)
