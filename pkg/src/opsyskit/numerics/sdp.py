"""Dense small-scale semidefinite programming.

Problems are stated over real coordinates ``y``: every hermitian matrix
variable is expanded in an orthonormal real basis, constraints are affine
hermitian expressions ``C + sum_i y_i F_i`` that must be PSD, plus real
linear equalities.  Equalities are eliminated exactly up front (affine
parametrisation of their solution set); the remaining conic problem is
doubled to real symmetric form and handed to CVXOPT's primal-dual
interior-point method, which runs on a homogeneous self-dual embedding and
so reports infeasibility certificates.

Every verdict is re-checked by :func:`verify_primal` or
:func:`verify_infeasibility`, which evaluate the original hermitian
expressions with ``numpy.linalg.eigvalsh`` and never touch the doubled
problem or the solver state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ..config import Tolerances, resolve
from ..errors import InvalidInput, NumericalBreakdown, ShapeMismatch, SizeCapExceeded
from .linalg import complex_to_real, hermitian_basis, real_to_complex_dual

log = logging.getLogger(__name__)


class Affine:
    """Matrix-valued affine function ``const + sum_i y[i] * terms[i]`` of the real coordinates."""

    __slots__ = ("const", "terms")
    __array_ufunc__ = None  # make ndarray (op) Affine defer to Affine

    def __init__(self, const: np.ndarray, terms: dict[int, np.ndarray] | None = None):
        self.const = np.asarray(const, dtype=complex)
        self.terms = {} if terms is None else terms

    @property
    def shape(self) -> tuple[int, ...]:
        return self.const.shape

    @classmethod
    def constant(cls, c) -> "Affine":
        c = np.asarray(c, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1, 1)
        return cls(c.copy())

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "Affine":
        """Apply a *linear* matrix function termwise."""
        return Affine(f(self.const), {i: f(t) for i, t in self.terms.items()})

    def __add__(self, other) -> "Affine":
        if not isinstance(other, Affine):
            other = Affine.constant(other)
        if other.shape != self.shape:
            raise ShapeMismatch(f"cannot add {self.shape} and {other.shape}")
        terms = dict(self.terms)
        for i, t in other.terms.items():
            terms[i] = terms[i] + t if i in terms else t
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return self.map(lambda m: -m)

    def __sub__(self, other) -> "Affine":
        if not isinstance(other, Affine):
            other = Affine.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "Affine":
        return (-self) + other

    def __mul__(self, s) -> "Affine":
        s = complex(s)
        return self.map(lambda m: s * m)

    __rmul__ = __mul__

    def kron(self, left=None, right=None) -> "Affine":
        def f(m):
            if left is not None:
                m = np.kron(left, m)
            if right is not None:
                m = np.kron(m, right)
            return m
        return self.map(f)

    def congruence(self, a: np.ndarray) -> "Affine":
        ah = a.conj().T
        return self.map(lambda m: a @ m @ ah)

    def trace(self) -> "Affine":
        return self.map(lambda m: np.trace(m).reshape(1, 1))

    def pair(self, m: np.ndarray) -> "Affine":
        """The scalar ``tr(m @ self)``."""
        return self.map(lambda x: np.sum(m.T * x).reshape(1, 1))

    def expand(self, m: np.ndarray) -> "Affine":
        """Scale a constant matrix by this 1×1 expression."""
        if self.shape != (1, 1):
            raise ShapeMismatch("expand needs a 1x1 expression")
        return self.map(lambda s: s[0, 0] * np.asarray(m, dtype=complex))

    def value(self, y: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for i, t in self.terms.items():
            out = out + y[i] * t
        return out


def stack_blocks(parts: Sequence[Affine]) -> Affine:
    """Block-diagonal assembly of square expressions."""
    sizes = [p.shape[0] for p in parts]
    n = sum(sizes)

    def place(j, m):
        out = np.zeros((n, n), dtype=complex)
        o = sum(sizes[:j])
        out[o:o + sizes[j], o:o + sizes[j]] = m
        return out

    total = Affine(np.zeros((n, n), dtype=complex))
    for j, p in enumerate(parts):
        total = total + p.map(lambda m, j=j: place(j, m))
    return total


class SdpStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    MARGINAL = "Marginal"


@dataclass
class SdpOutcome:
    status: SdpStatus
    y: np.ndarray | None = None
    values: dict = field(default_factory=dict)
    objective_value: float = float("nan")
    dual_objective: float = float("nan")
    margin: float = float("nan")
    dual: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def has_primal(self) -> bool:
        return self.status in (SdpStatus.OPTIMAL, SdpStatus.FEASIBLE)

    def __getitem__(self, name):
        return self.values[name]


class SdpProblem:
    """Builder for a block semidefinite program over real coordinates."""

    def __init__(self):
        self.n = 0
        self._vars: dict[str, object] = {}
        self._scalars: set[str] = set()
        self.psd: list[Affine] = []
        self.psd_names: list[str] = []
        self.eq_rows: list[dict[int, float]] = []
        self.eq_rhs: list[float] = []
        self.objective: Affine | None = None
        self.sense = 1.0

    # -- variables
    def _fresh(self, k: int) -> range:
        r = range(self.n, self.n + k)
        self.n += k
        return r

    def real(self, name: str) -> Affine:
        (i,) = self._fresh(1)
        e = Affine(np.zeros((1, 1), dtype=complex), {i: np.ones((1, 1), dtype=complex)})
        self._vars[name] = e
        self._scalars.add(name)
        return e

    def hermitian(self, name: str, d: int) -> Affine:
        basis = hermitian_basis(d)
        idx = self._fresh(len(basis))
        e = Affine(np.zeros((d, d), dtype=complex), dict(zip(idx, basis)))
        self._vars[name] = e
        return e

    def hermitian_blocks(self, name: str, blocks: Sequence[int]) -> list[Affine]:
        parts = [self.hermitian(f"{name}[{j}]", d) for j, d in enumerate(blocks)]
        self._vars[name] = parts
        return parts

    # -- constraints
    def add_psd(self, expr: Affine, name: str | None = None) -> None:
        if expr.shape[0] != expr.shape[1]:
            raise ShapeMismatch("PSD constraint must be square")
        self.psd.append(expr)
        self.psd_names.append(name or f"psd{len(self.psd) - 1}")

    def add_eq(self, expr: Affine, rhs=0.0) -> None:
        """Entrywise equality ``expr == rhs`` (real and imaginary parts)."""
        rhs = np.broadcast_to(np.asarray(rhs, dtype=complex), expr.shape)
        for part in (np.real, np.imag):
            c = part(expr.const).ravel()
            r = part(rhs).ravel()
            coef = {i: part(t).ravel() for i, t in expr.terms.items()}
            for k in range(c.size):
                row = {i: v[k] for i, v in coef.items() if v[k] != 0.0}
                if not row and abs(r[k] - c[k]) == 0.0:
                    continue
                self.eq_rows.append(row)
                self.eq_rhs.append(float(r[k] - c[k]))

    def minimize(self, expr: Affine) -> None:
        self.objective, self.sense = expr, 1.0

    def maximize(self, expr: Affine) -> None:
        self.objective, self.sense = expr, -1.0

    # -- dense views
    def eq_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.zeros((len(self.eq_rows), self.n))
        for r, row in enumerate(self.eq_rows):
            for i, v in row.items():
                a[r, i] += v
        return a, np.array(self.eq_rhs, dtype=float)

    def cost_vector(self) -> tuple[np.ndarray, float]:
        c = np.zeros(self.n)
        if self.objective is None:
            return c, 0.0
        for i, t in self.objective.terms.items():
            c[i] = self.sense * np.real(t[0, 0])
        return c, self.sense * float(np.real(self.objective.const[0, 0]))

    def psd_dim(self) -> int:
        return sum(e.shape[0] for e in self.psd)

    def extract(self, y: np.ndarray) -> dict:
        out = {}
        for name, v in self._vars.items():
            if isinstance(v, list):
                out[name] = [p.value(y) for p in v]
            elif name in self._scalars:
                out[name] = float(np.real(v.value(y)[0, 0]))
            else:
                out[name] = v.value(y)
        return out


# --- independent verification ------------------------------------------------

def verify_primal(p: SdpProblem, y: np.ndarray, tols: Tolerances | None = None) -> tuple[bool, dict]:
    """Substitute ``y`` into every constraint of ``p``."""
    t = resolve(tols)
    if y is None or not np.all(np.isfinite(y)):
        return False, {"reason": "non-finite primal"}
    worst_eq = 0.0
    for row, rhs in zip(p.eq_rows, p.eq_rhs):
        lhs = sum(v * y[i] for i, v in row.items())
        worst_eq = max(worst_eq, abs(lhs - rhs) / (1.0 + abs(rhs)))
    margin = np.inf
    for e in p.psd:
        m = e.value(y)
        m = 0.5 * (m + m.conj().T)
        lam = np.linalg.eigvalsh(m)[0] if m.size else np.inf
        margin = min(margin, float(lam))
    ok = worst_eq <= t.feas and margin >= -t.feas
    return ok, {"eq_residual": worst_eq, "margin": margin}


def verify_infeasibility(p: SdpProblem, zs: Sequence[np.ndarray], w: np.ndarray,
                         tols: Tolerances | None = None) -> tuple[bool, dict]:
    """Check a Farkas certificate: ``Z_j >= 0`` with ``sum_j <Z_j, F_j(y)> = <Z, C> + b·w``
    for every ``y`` satisfying the equalities, and that value negative."""
    t = resolve(tols)
    a, b = p.eq_matrix()
    g = np.zeros(p.n)
    value = 0.0
    min_eig = np.inf
    for z, e in zip(zs, p.psd):
        min_eig = min(min_eig, float(np.linalg.eigvalsh(z)[0]) if z.size else np.inf)
        value += float(np.real(np.sum(z.T * e.const)))
        for i, term in e.terms.items():
            g[i] += float(np.real(np.sum(z.T * term)))
    resid = g - (a.T @ w if a.size else 0.0)
    value += float(b @ w) if b.size else 0.0
    scale = 1.0 + sum(float(np.abs(z).sum()) for z in zs)
    r = float(np.abs(resid).max(initial=0.0))
    ok = min_eig >= -t.feas * scale and r <= t.feas * scale and value <= -0.5
    return ok, {"value": value, "residual": r, "min_eig": min_eig}


# --- solver ------------------------------------------------------------------

def _null_space(a: np.ndarray, rtol: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the row space and null space of ``a``."""
    if a.shape[0] == 0:
        return np.zeros((0, a.shape[1])), np.eye(a.shape[1])
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > rtol * max(1.0, s[0] if s.size else 0.0)))
    return vt[:rank], vt[rank:].T


def _psd_stack(e: Affine, n: int) -> tuple[np.ndarray, np.ndarray]:
    m = e.shape[0]
    f = np.zeros((m * m, n), dtype=complex)
    for i, t in e.terms.items():
        f[:, i] += t.ravel()
    return e.const, f


_SOLVER_OPTS = {"show_progress": False, "abstol": 1e-10, "reltol": 1e-10,
                "feastol": 1e-10, "maxiters": 200, "refinement": 2}

# fallbacks tried in order when the interior-point iteration breaks down or
# stalls; every result is still checked by the independent verifier
_ATTEMPTS = (
    ({}, None),
    ({}, "ldl"),
    ({"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9}, "ldl"),
    ({"abstol": 1e-8, "reltol": 1e-8, "feastol": 1e-8}, None),
)


def _run_cvxopt(c, gs, hs):
    from cvxopt import solvers
    last_exc, fallback = None, None
    for k, (extra, kkt) in enumerate(_ATTEMPTS):
        opts = {**_SOLVER_OPTS, **extra}
        try:
            sol = solvers.sdp(c, Gs=gs, hs=hs, kktsolver=kkt, options=opts)
        except (ArithmeticError, ValueError) as exc:
            last_exc = exc
            continue
        sol["attempt"] = k
        if sol["status"] in ("optimal", "primal infeasible"):
            return sol
        if fallback is None:
            fallback = sol
    if fallback is not None:
        return fallback
    raise NumericalBreakdown(f"interior-point solver failed: {last_exc}") from last_exc


def sdp_solve(p: SdpProblem, tols: Tolerances | None = None) -> SdpOutcome:
    """Solve ``p`` and return a verified outcome.

    Raises :class:`SizeCapExceeded` above ``tols.size_cap`` total PSD dimension
    and :class:`NumericalBreakdown` when the solver produces non-finite data.
    """
    t = resolve(tols)
    if p.psd_dim() > t.size_cap:
        raise SizeCapExceeded(f"total PSD dimension {p.psd_dim()} exceeds cap {t.size_cap}")
    a, b = p.eq_matrix()
    c, c0 = p.cost_vector()
    stats = {"n_coords": p.n, "n_eq": len(b), "psd_dim": p.psd_dim()}

    # exact elimination of equalities: y = y0 + Z u
    if a.shape[0]:
        y0, *_ = np.linalg.lstsq(a, b, rcond=None)
        if np.abs(a @ y0 - b).max() > t.feas * (1.0 + np.abs(b).max()):
            # b is not in range(A): w = residual gives A^T w = 0, b·w > 0
            w = -(b - a @ y0)
            w = w / max(float(-(b @ w)), 1e-300)
            zs = [np.zeros(e.shape, dtype=complex) for e in p.psd]
            ok, info = verify_infeasibility(p, zs, w, t)
            status = SdpStatus.INFEASIBLE if ok else SdpStatus.MARGINAL
            return SdpOutcome(status, dual={"zs": zs, "w": w, **info}, stats=stats)
        _, z = _null_space(a, 1e-11)
    else:
        y0, z = np.zeros(p.n), np.eye(p.n)

    consts, stacks = [], []
    for e in p.psd:
        c_j, f_j = _psd_stack(e, p.n)
        m = e.shape[0]
        consts.append(c_j + (f_j @ y0).reshape(m, m))
        stacks.append(f_j @ z)
    cz = z.T @ c
    obj0 = c0 + c @ y0

    # drop coordinates the PSD constraints cannot see
    if z.shape[1]:
        g_all = np.vstack([np.vstack([s.real, s.imag]) for s in stacks]) if stacks else np.zeros((0, z.shape[1]))
        rows, null = _null_space(g_all, 1e-11)
        if null.shape[1] and np.abs(null.T @ cz).max() > 1e-9 * (1 + np.abs(cz).max()):
            raise NumericalBreakdown("objective is unbounded along directions free of PSD constraints")
        v = rows.T
    else:
        v = np.zeros((0, 0))
    stacks = [s @ v for s in stacks]
    cv = v.T @ cz
    basis = z @ v
    nfree = v.shape[1]
    stats["n_free"] = nfree

    if nfree == 0:
        y = y0.copy()
        ok, info = verify_primal(p, y, t)
        if ok:
            status = SdpStatus.OPTIMAL if p.objective is not None else SdpStatus.FEASIBLE
            return SdpOutcome(status, y=y, values=p.extract(y), objective_value=p.sense * obj0,
                              dual_objective=p.sense * obj0, margin=info["margin"], stats=stats)
        zs = []
        for cj in consts:
            lam, vec = np.linalg.eigh(0.5 * (cj + cj.conj().T))
            zs.append(np.outer(vec[:, 0], vec[:, 0].conj()) if lam[0] < 0 else np.zeros_like(cj))
        return _finish_infeasible(p, zs, a, t, stats)

    from cvxopt import matrix

    gs, hs = [], []
    for cj, fj in zip(consts, stacks):
        m = cj.shape[0]
        cols = np.empty(((2 * m) ** 2, nfree))
        for k in range(nfree):
            cols[:, k] = -complex_to_real(fj[:, k].reshape(m, m)).ravel(order="F")
        gs.append(matrix(cols))
        hs.append(matrix(complex_to_real(cj)))
    sol = _run_cvxopt(matrix(cv), gs, hs)
    stats.update({"solver_status": sol["status"], "iterations": sol.get("iterations"),
                  "attempt": sol["attempt"]})

    if sol["status"] == "primal infeasible" and sol["zs"] is not None:
        zs = [real_to_complex_dual(np.array(zk)) for zk in sol["zs"]]
        return _finish_infeasible(p, zs, a, t, stats)

    x = sol["x"]
    if x is None:
        return SdpOutcome(SdpStatus.MARGINAL, stats=stats)
    u = np.array(x).ravel()
    if not np.all(np.isfinite(u)):
        raise NumericalBreakdown("solver returned a non-finite iterate")
    y = y0 + basis @ u
    ok, info = verify_primal(p, y, t)
    stats.update(info)
    if not ok:
        return SdpOutcome(SdpStatus.MARGINAL, y=y, margin=info.get("margin", np.nan), stats=stats)
    zs = [real_to_complex_dual(np.array(zk)) for zk in sol["zs"]] if sol["zs"] is not None else []
    pobj = p.sense * (c @ y + c0)
    dobj = np.nan
    if sol.get("dual objective") is not None:
        dobj = p.sense * (float(sol["dual objective"]) + obj0)
    status = SdpStatus.FEASIBLE
    if p.objective is not None and sol["status"] == "optimal":
        status = SdpStatus.OPTIMAL
    elif p.objective is None:
        status = SdpStatus.FEASIBLE
    return SdpOutcome(status, y=y, values=p.extract(y), objective_value=float(pobj),
                      dual_objective=float(dobj), margin=info["margin"],
                      dual={"zs": zs}, stats=stats)


def _finish_infeasible(p, zs, a, t, stats) -> SdpOutcome:
    g = np.zeros(p.n)
    for zj, e in zip(zs, p.psd):
        for i, term in e.terms.items():
            g[i] += float(np.real(np.sum(zj.T * term)))
    w = np.linalg.lstsq(a.T, g, rcond=None)[0] if a.size else np.zeros(0)
    # normalise so the certificate value is -1
    _, info = verify_infeasibility(p, zs, w, t)
    val = info["value"]
    if val < 0:
        s = -1.0 / val
        zs = [s * zj for zj in zs]
        w = s * w
    ok, info = verify_infeasibility(p, zs, w, t)
    stats.update(info)
    status = SdpStatus.INFEASIBLE if ok else SdpStatus.MARGINAL
    return SdpOutcome(status, dual={"zs": zs, "w": w}, stats=stats)


def max_margin(p: SdpProblem, exprs: Sequence[Affine], cap: float = 1.0) -> Affine:
    """Add ``expr - t I >= 0`` for each expression, ``t <= cap``, and maximise ``t``.

    Returns the margin variable.  The resulting problem is always strictly
    feasible, which keeps the interior-point iteration well conditioned.
    """
    t = p.real("__margin")
    for e in exprs:
        p.add_psd(e - t.expand(np.eye(e.shape[0])))
    p.add_psd(Affine.constant(np.array([[cap]])) - t)
    p.maximize(t)
    return t
