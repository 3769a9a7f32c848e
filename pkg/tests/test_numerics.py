import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opsyskit.errors import InvalidInput, NotHermitian, SizeCapExceeded
from opsyskit.config import Tolerances
from opsyskit.numerics import (Affine, SdpProblem, SdpStatus, Status, complex_to_real, hermitian,
                               max_margin, min_eigenvalue, psd_check, sdp_solve)
from opsyskit.numerics.linalg import random_hermitian, random_psd
from opsyskit.numerics.sdp import verify_infeasibility, verify_primal


def count_below(h, lam):
    """Eigenvalues of ``h`` below ``lam``, from sign changes of leading principal minors."""
    n = h.shape[0]
    prev, changes = 1.0, 0
    for k in range(1, n + 1):
        d = float(np.real(np.linalg.det(h[:k, :k] - lam * np.eye(k))))
        if d * prev < 0:
            changes += 1
        prev = d
    return changes


def bisection_min_eig(h, tol=1e-13):
    r = float(np.abs(h).sum()) + 1.0
    lo, hi = -r, r
    while hi - lo > tol * r:
        mid = 0.5 * (lo + hi)
        if count_below(h, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def hermitians(max_n=5):
    def build(args):
        n, seed = args
        return random_hermitian(np.random.default_rng(seed), n)
    return st.tuples(st.integers(1, max_n), st.integers(0, 2 ** 32 - 1)).map(build)


# --- min_eigenvalue ------------------------------------------------------------------------

def test_min_eigenvalue_identity():
    lam, vec = min_eigenvalue(np.eye(3))
    assert lam == 1.0
    assert np.isclose(np.linalg.norm(vec), 1.0)


def test_min_eigenvalue_diagonal():
    lam, vec = min_eigenvalue(np.diag([2.0, -1.0]))
    assert lam == -1.0
    assert np.isclose(abs(vec[1]), 1.0)


def test_min_eigenvalue_matches_bisection_oracle(rng):
    h = random_hermitian(rng, 6)
    lam, vec = min_eigenvalue(h)
    assert abs(lam - bisection_min_eig(h)) <= 1e-10
    assert np.linalg.norm(h @ vec - lam * vec) <= 1e-10


def test_min_eigenvalue_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        min_eigenvalue(np.array([[np.nan, 0], [0, 1]]))


@settings(max_examples=50, deadline=None)
@given(hermitians(), st.floats(-10, 10))
def test_min_eigenvalue_shift_invariance(h, c):
    a, _ = min_eigenvalue(h)
    b, _ = min_eigenvalue(h + c * np.eye(h.shape[0]))
    assert abs(b - (a + c)) <= 1e-10


# --- psd_check ------------------------------------------------------------------------------

def test_psd_check_identity():
    v = psd_check(np.eye(2), 0.0)
    assert v.status is Status.MEMBER
    assert v.margin == 1.0


def test_psd_check_negative_diagonal():
    v = psd_check(np.diag([1.0, -0.5]), 1e-9)
    assert v.status is Status.NON_MEMBER
    assert np.isclose(abs(v.witness[1]), 1.0)
    assert np.isclose(v.margin, -0.5)


def test_psd_check_rank_one(rng):
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v = psd_check(np.outer(x, x.conj()), 1e-10 * np.linalg.norm(x) ** 2)
    assert v.member
    assert abs(v.margin) <= 1e-10 * np.linalg.norm(x) ** 2


def test_psd_check_rejects_negative_tol():
    with pytest.raises(InvalidInput):
        psd_check(np.eye(2), -1.0)


def test_hermitian_validation():
    with pytest.raises(NotHermitian):
        hermitian(np.array([[0, 1], [0, 0]]))
    h = hermitian(np.array([[1, 1j], [-1j, 2]]))
    assert np.array_equal(h, h.conj().T)


# --- complex_to_real ---------------------------------------------------------------------------

def test_doubling_scalar():
    assert np.array_equal(complex_to_real(np.array([[3.5]])), np.diag([3.5, 3.5]))


def test_doubling_off_diagonal_i():
    h = np.array([[0, 1j], [-1j, 0]])
    r = complex_to_real(h)
    assert np.allclose(r, r.T)
    assert np.allclose(np.sort(np.linalg.eigvalsh(r)), [-1, -1, 1, 1])


def test_doubling_identity():
    assert np.array_equal(complex_to_real(np.eye(3)), np.eye(6))


@settings(max_examples=50, deadline=None)
@given(hermitians(), st.floats(-3, 3))
def test_doubling_preserves_psd_verdict(h, c):
    h = h + c * np.eye(h.shape[0])
    a = psd_check(h, 0.0)
    b = psd_check(complex_to_real(h), 0.0)
    # doubling repeats each eigenvalue twice
    assert abs(a.margin - b.margin) <= 1e-10
    if abs(a.margin) > 1e-10:
        assert a.status == b.status


# --- sdp_solve ----------------------------------------------------------------------------------

def test_sdp_trace_minimization():
    p = SdpProblem()
    x = p.hermitian("X", 2)
    p.add_psd(x - np.eye(2))
    p.minimize(x.trace())
    out = sdp_solve(p)
    assert out.status is SdpStatus.OPTIMAL
    assert abs(out.objective_value - 2.0) <= 1e-7
    assert np.allclose(out["X"], np.eye(2), atol=1e-6)
    assert abs(out.objective_value - out.dual_objective) <= Tolerances().gap
    ok, _ = verify_primal(p, out.y)
    assert ok


def test_sdp_negative_trace_infeasible():
    p = SdpProblem()
    x = p.hermitian("X", 2)
    p.add_psd(x)
    p.add_eq(x.trace(), -1.0)
    out = sdp_solve(p)
    assert out.status is SdpStatus.INFEASIBLE
    ok, info = verify_infeasibility(p, out.dual["zs"], out.dual["w"])
    assert ok
    assert info["value"] < 0


def test_sdp_planted_interior_point(rng):
    d = 4
    x0 = random_psd(rng, d) + 0.5 * np.eye(d)
    p = SdpProblem()
    x = p.hermitian("X", d)
    for _ in range(5):
        a = random_hermitian(rng, d)
        p.add_eq(x.pair(a), np.trace(a @ x0))
    max_margin(p, [x], cap=1.0)
    out = sdp_solve(p)
    assert out.has_primal
    assert out.margin > 0
    assert out.objective_value > 0
    ok, info = verify_primal(p, out.y)
    assert ok and info["eq_residual"] <= 1e-8


def test_sdp_size_cap():
    p = SdpProblem()
    x = p.hermitian("X", 5)
    p.add_psd(x)
    with pytest.raises(SizeCapExceeded):
        sdp_solve(p, Tolerances(size_cap=4))


def test_sdp_deterministic(rng):
    a = random_hermitian(rng, 3)
    outs = []
    for _ in range(2):
        p = SdpProblem()
        x = p.hermitian("X", 3)
        p.add_psd(x - Affine.constant(a))
        p.minimize(x.trace())
        outs.append(sdp_solve(p).y)
    assert np.array_equal(outs[0], outs[1])
    # optimum of min tr X with X >= a is the sum of a's positive eigenvalues
    lam = np.linalg.eigvalsh(a)
    p = SdpProblem()
    x = p.hermitian("X", 3)
    p.add_psd(x - Affine.constant(a))
    p.add_psd(x)
    p.minimize(x.trace())
    assert abs(sdp_solve(p).objective_value - lam[lam > 0].sum()) <= 1e-7
