"""Numerical tolerances.

All values are double-precision desk-scale defaults; every public operation
takes an optional ``tols`` argument so a run can override them as a unit.
"""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-8
    eig: float = 1e-10
    gap: float = 1e-7
    cert: float = 1e-8
    cond_floor: float = 1e-8
    size_cap: int = 400

    def with_overrides(self, **kw) -> "Tolerances":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


DEFAULT = Tolerances()


def resolve(tols: Tolerances | None) -> Tolerances:
    return DEFAULT if tols is None else tols
