"""The half-disk ordered space ``V`` over ``ℓ∞²``: explicit ε-lifts of positive
targets through the projection ``(x, y, z) ↦ (x, y)``, and the closed-form
record showing that a boundary target has no positive lift at all.

Cone membership is evaluated exactly in rational arithmetic, so every audit
below is a proof about the floating-point numbers actually emitted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInput, NotPSD, ZeroSecondBlock

UNIT = (1.0, 1.0, 2.0)


def v_membership(x: float, y: float, z: float) -> bool:
    """``z ≥ 0``, ``y ≥ 0`` and ``(x - z)² + y² ≤ z²``, decided exactly."""
    fx, fy, fz = Fraction(x), Fraction(y), Fraction(z)
    return fz >= 0 and fy >= 0 and (fx - fz) ** 2 + fy ** 2 <= fz ** 2


def lowest_height(x: float, y: float) -> float:
    """Smallest float ``z`` with ``(x, y, z) ∈ V⁺``.

    Closed form ``z = (x² + y²) / (2x)`` for ``x > 0``; the float is nudged
    upward until the exact audit accepts it.
    """
    if y < 0 or x < 0 or (x == 0 and y > 0):
        raise InvalidInput(f"({x}, {y}) has no preimage in the cone")
    if x == 0:
        return 0.0
    z = (x * x + y * y) / (2 * x)
    while not v_membership(x, y, z):
        z = float(np.nextafter(z, np.inf))
    return z


@dataclass
class ConicTerm:
    coefficient: np.ndarray  # PSD n×n
    vector: tuple[float, float, float]
    label: str
    in_cone: bool = False
    min_eig: float = float("nan")


@dataclass
class OmaxLift:
    alpha1: np.ndarray
    alpha2: np.ndarray
    eps: float
    terms: list[ConicTerm]
    projection_defect: float
    audit_ok: bool
    notes: list[str] = field(default_factory=list)

    def element(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The lift as coordinate matrices ``(X, Y, Z)`` of ``M_n(V)``."""
        out = [sum(t.coefficient * t.vector[c] for t in self.terms) for c in range(3)]
        return out[0], out[1], out[2]


def _psd_input(a, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.shape[0] != a.shape[1]:
        raise InvalidInput(f"{name} must be square")
    if np.abs(a - a.conj().T).max() > 1e-12 * max(1.0, float(np.abs(a).max())):
        raise InvalidInput(f"{name} must be hermitian")
    a = (a + a.conj().T) / 2
    if np.linalg.eigvalsh(a)[0] < -1e-12 * max(1.0, float(np.abs(a).max())):
        raise NotPSD(f"{name} is not positive semidefinite")
    return a


def omax_lift(alpha1, alpha2, eps: float, psd_tol: float = 1e-12) -> OmaxLift:
    """Positive lift of ``α₁⊗(1,0) + α₂⊗(0,1) + ε I⊗(1,1)`` as a conic combination.

    The three terms are ``(α₁ + ε/2 (I - α₂/‖α₂‖)) ⊗ (1,0)``,
    ``α₂ ⊗ (ε/(2‖α₂‖), 1)`` and ``ε I ⊗ (1/2, 1)``, each with the lowest
    height that puts its vector in ``V⁺``.  Every vector is audited exactly and
    every coefficient is eigenvalue-checked; ``audit_ok`` is their conjunction.
    """
    a1, a2 = _psd_input(alpha1, "alpha1"), _psd_input(alpha2, "alpha2")
    if a1.shape != a2.shape:
        raise InvalidInput("alpha1 and alpha2 must have the same size")
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    norm = float(np.linalg.eigvalsh(a2)[-1])
    if norm <= 0:
        raise ZeroSecondBlock("the second block is zero; the formula divides by its norm")
    n = a1.shape[0]
    eye = np.eye(n)
    c = eps / (2 * norm)
    raw = [
        (a1 + eps / 2 * (eye - a2 / norm), (1.0, 0.0), "first coordinate"),
        (a2, (c, 1.0), "second block"),
        (eps * eye.astype(complex), (0.5, 1.0), "unit correction"),
    ]
    terms, notes, ok = [], [], True
    for coef, (x, y), label in raw:
        z = lowest_height(x, y)
        lam = float(np.linalg.eigvalsh(coef)[0])
        term = ConicTerm(coef, (x, y, z), label, v_membership(x, y, z), lam)
        if lam < -psd_tol * max(1.0, float(np.abs(coef).max())):
            ok = False
            notes.append(f"{label}: coefficient has eigenvalue {lam:.3e}")
        if not term.in_cone:
            ok = False
            notes.append(f"{label}: vector {term.vector} is outside the cone")
        terms.append(term)
    target_x = a1 + eps * eye
    target_y = a2 + eps * eye
    lift = OmaxLift(a1, a2, eps, terms, 0.0, ok, notes)
    x_img, y_img, _ = lift.element()
    lift.projection_defect = float(max(np.abs(x_img - target_x).max(), np.abs(y_img - target_y).max()))
    return lift


@dataclass
class NoLiftProof:
    v_norm: float
    target: tuple[float, float]
    fiber: str
    steps: list[str]
    gap: float
    impossible: bool


def no_lift_proof(v_norm: float) -> NoLiftProof:
    """Record why ``(0, ‖v‖)`` has no preimage in ``V⁺``.

    Every preimage is ``(0, ‖v‖, z)``; membership would need
    ``(0 - z)² + ‖v‖² ≤ z²``, i.e. ``‖v‖² ≤ 0``.
    """
    if not v_norm > 0:
        raise InvalidInput("v_norm must be positive")
    v = Fraction(v_norm)
    steps = [
        f"any preimage of (0, {v_norm!r}) has the form (0, {v_norm!r}, z)",
        f"membership requires (0 - z)^2 + {v_norm!r}^2 <= z^2",
        f"that is z^2 + {float(v * v)!r} <= z^2",
        f"that is {float(v * v)!r} <= 0, false for every z",
    ]
    return NoLiftProof(v_norm, (0.0, v_norm), f"{{(0, {v_norm!r}, z) : z real}}", steps,
                       float(v * v), v * v > 0)


def random_target(rng: np.random.Generator, n: int, floor: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Strictly positive ``(α₁, α₂)`` of size ``n``."""
    out = []
    for _ in range(2):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        out.append(g @ g.conj().T / n + floor * np.eye(n))
    return out[0], out[1]
