import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opsyskit.constructions import (CoproductStatus, QuotientCheck, check_package, coproduct,
                                    coproduct_membership, coproduct_quotient_realization,
                                    dual_coproduct, kernel_of, pad_factorization, pair_algebra,
                                    perturbed_lift, quotient, quotient_map_check, quotient_membership,
                                    random_lift_instance, recenter, refute, shift_value,
                                    universal_quotient, verify_family, verify_shifts)
from opsyskit.errors import EmptyFamily, NotContraction, SpanDeficit
from opsyskit.numerics.linalg import random_hermitian
from opsyskit.opsys import CpMap, cp_check, ell_inf, map_from_function, matrix_algebra


def diag(*v):
    return np.diag(np.asarray(v, dtype=complex))


def random_element(rng, cs, n):
    parts = []
    for c in cs.components:
        x = np.zeros((n, c.amb, n, c.amb), dtype=complex)
        for sl in c.block_slices():
            b = sl.stop - sl.start
            x[:, sl, :, sl] = random_hermitian(rng, n * b).reshape(n, b, n, b)
        parts.append(x.reshape(n * c.amb, n * c.amb))
    return cs.element(parts, n)


# --- coproducts ------------------------------------------------------------------------------

def test_empty_family():
    with pytest.raises(EmptyFamily):
        coproduct([])


def test_single_component_matches_component_cone():
    cs = coproduct([ell_inf(2)])
    assert cs.dim == 2
    assert coproduct_membership(cs.element([diag(1, 0.5)])).member
    assert coproduct_membership(cs.element([diag(1, -0.5)])).refuted


def test_unit_member_with_zero_shifts():
    cs = coproduct([ell_inf(2), ell_inf(2)])
    for n in (1, 2):
        v = coproduct_membership(cs.unit(n))
        assert v.member
        assert all(np.abs(a).max() <= 1e-6 for a in v.shifts)
        assert verify_shifts(cs.unit(n), [np.zeros((n, n))] * 2, 0.0)


def test_two_copies_of_ell_inf_two():
    cs = coproduct([ell_inf(2), ell_inf(2)])
    x = cs.element([diag(1, -1), diag(1, -1)])
    # the explicit shifts -1, +1 certify x + 2·unit exactly
    assert verify_shifts(x.shifted(2.0), [np.array([[-1.0]]), np.array([[1.0]])], 0.0)
    assert coproduct_membership(x.shifted(2.0), eps=1e-6).member
    for t in (0.0, 1.0, 1.9, 1.99):
        v = coproduct_membership(x.shifted(t))
        assert v.refuted
        assert verify_family(x.shifted(t), v.family, 0.0)
        assert abs(v.value - (t - 2.0)) <= 1e-6
    # brute force over scalar shifts c, -c: the best value is t - 2
    cs_grid = np.linspace(-3, 3, 6001)
    best = max(min(-1 + c, -1 - c) for c in cs_grid)
    assert abs(best - (-1.0)) <= 1e-9
    value, _, _ = shift_value(x)
    assert abs(value - 2 * best) <= 1e-6


def test_level_two_refutation(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    # the -1 sits inside one component; unit-direction shifts cannot reach it
    x = cs.element([np.kron(np.eye(2), diag(1, -1)), np.zeros((4, 4))], 2)
    v = coproduct_membership(x)
    assert v.refuted
    assert verify_family(x, v.family, 0.0)
    fam = v.family
    assert sum(np.real(np.sum(r.T * p)) for r, p in zip(fam, x.parts)) < 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2), st.floats(0, 0.2))
def test_criterion_witness_exclusivity(seed, n, eps):
    rng = np.random.default_rng(seed)
    cs = coproduct([pair_algebra(1), pair_algebra(2)])
    x = random_element(rng, cs, n)
    value, shifts, _ = shift_value(x, cap=10.0)
    x = x.shifted(-value + float(rng.uniform(-0.05, 0.05)))
    value, shifts, _ = shift_value(x, cap=10.0)
    fam, _ = refute(x, eps)
    ok_shift = shifts is not None and verify_shifts(x, recenter(shifts), eps)
    ok_family = fam is not None and verify_family(x, fam, eps)
    assert not (ok_shift and ok_family)


def test_realization_dimensions():
    cs = coproduct([ell_inf(1), ell_inf(1)])
    real = coproduct_quotient_realization(cs)
    assert real.kernel.dim == 1
    assert real.parent.dim - real.kernel.dim == 1 == cs.dim
    cs2 = coproduct([ell_inf(2), ell_inf(3)])
    real2 = coproduct_quotient_realization(cs2)
    assert real2.parent.dim - real2.kernel.dim == cs2.dim == 4


def test_realization_unit_and_roundtrip(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(2)])
    real = coproduct_quotient_realization(cs)
    u = real.forward(cs.unit())
    q = quotient(real.kernel)
    # m·(I, 0) and (I, I) differ by an element of N
    assert quotient_membership(q, u - np.eye(real.parent.amb), 1, 1e-9).member
    assert quotient_membership(q, np.eye(real.parent.amb) - u, 1, 1e-9).member
    x = random_element(rng, cs, 2)
    back = real.backward(real.forward(x), 2)
    assert all(np.allclose(a, b) for a, b in zip(back.parts, x.parts))


def test_realization_agreement(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1), ell_inf(3)])
    real = coproduct_quotient_realization(cs)
    q = quotient(real.kernel)
    eps = 1e-3
    agreed = 0
    while agreed < 30:
        x = random_element(rng, cs, 1)
        value, _, _ = shift_value(x, cap=10.0)
        x = x.shifted(-value + float(rng.uniform(-0.3, 0.3)))
        a = coproduct_membership(x, eps)
        if a.status is CoproductStatus.UNKNOWN:
            continue
        b = quotient_membership(q, real.forward(x), 1, eps)
        assert a.member == b.member
        assert a.refuted == b.non_member
        agreed += 1


# --- quotients -----------------------------------------------------------------------------

def collapse_map():
    src, tgt = ell_inf(3), ell_inf(2)
    return map_from_function(src, tgt, lambda x: diag((x[0, 0] + x[1, 1]) / 2, x[2, 2]))


def test_kernel_of_collapse():
    k = kernel_of(collapse_map())
    assert k.dim == 1
    v = np.diag(k.span[0]).real
    assert np.allclose(v / v[0], [1, -1, 0])


def test_quotient_membership_examples():
    q = quotient(kernel_of(collapse_map()))
    for eps in (1e-6, 0.1):
        assert quotient_membership(q, np.zeros((3, 3)), 1, eps).member
    assert quotient_membership(q, diag(1, -1, 0), 1, 1e-6).member
    for eps in (1e-3, 0.5, 0.99):
        v = quotient_membership(q, diag(0, 0, -1), 1, eps)
        assert v.non_member
    assert quotient_membership(q, diag(0, 0, -1), 1, 1.01).member
    # brute force over the kernel direction: the third coordinate never moves
    for c in np.linspace(-5, 5, 101):
        assert (diag(0, 0, -1) + c * diag(1, -1, 0) + 0.99 * np.eye(3))[2, 2].real < 0


def test_quotient_map_check_identity():
    s = matrix_algebra(2)
    rep = quotient_map_check(CpMap(s, s, s.basis))
    assert rep.status is QuotientCheck.VERIFIED and rep.exact


def test_quotient_map_check_collapse():
    assert quotient_map_check(collapse_map()).status is QuotientCheck.VERIFIED


def test_quotient_map_check_realization():
    cs = coproduct([ell_inf(1), ell_inf(1)])
    real = coproduct_quotient_realization(cs)
    phi = real.kernel.provenance
    assert cp_check(phi).cp
    rep = quotient_map_check(phi, levels=(1, 2))
    assert rep.status is QuotientCheck.VERIFIED


def test_quotient_map_check_shrunken_cone():
    # (a, b) ↦ (a, (a+b)/2) is unital CP and bijective, but (0, 1) has no positive preimage
    s = ell_inf(2)
    phi = map_from_function(s, s, lambda x: diag(x[0, 0], (x[0, 0] + x[1, 1]) / 2))
    assert cp_check(phi).cp
    rep = quotient_map_check(phi)
    assert rep.status is QuotientCheck.FAILED
    assert rep.refutation is not None
    assert np.linalg.eigvalsh(rep.target)[0] >= -1e-9


# --- universal quotient and padding ------------------------------------------------------------

def test_universal_quotient_ell_inf_two():
    uq = universal_quotient(ell_inf(2), [(1, diag(1, 0)), (1, diag(0, 1))])
    assert [c.blocks for c in uq.cs.components] == [(1, 1), (1, 1)]
    chk = uq.phi.check()
    assert chk["unital"] and chk["cp"]
    lift = uq.lift(0)
    assert np.allclose(uq.phi.apply(lift), diag(1, 0))
    assert np.isclose(max(np.linalg.norm(p, 2) for p in lift.parts), 1.0)
    for _, f in uq.phi.parts:
        assert np.allclose(f.apply(f.domain.unit), np.eye(2))


def test_universal_quotient_matrix_level_two():
    target = matrix_algebra(2)
    v = np.zeros(4)
    v[0] = v[3] = 1 / np.sqrt(2)
    x = np.outer(v, v).astype(complex)  # rank-one, norm 1, level 2
    uq = universal_quotient(target, [(1, diag(1, 0)), (1, np.array([[0.5, 0.5], [0.5, 0.5]])), (2, x)])
    lift = uq.lift(2)
    assert np.abs(uq.phi.apply(lift) - x).max() <= 1e-12
    assert np.isclose(max(np.linalg.norm(p, 2) for p in lift.parts), 4.0)


def test_universal_quotient_errors():
    with pytest.raises(NotContraction):
        universal_quotient(ell_inf(2), [(1, diag(2, 0)), (1, diag(0, 1))])
    with pytest.raises(SpanDeficit):
        universal_quotient(ell_inf(3), [(1, diag(1, 0, 0))])


@pytest.mark.parametrize("a,k", [(1, 1), (2, 2), (1, 2), (2, 3), (2, 5)])
def test_pad_factorization(a, k):
    pf = pad_factorization(a, k)
    assert pf.roundtrip_defect() == 0.0
    for f in (pf.J, pf.Q):
        assert f.unit_defect() <= 1e-12
        assert cp_check(f).cp


def test_pad_examples():
    pf = pad_factorization(2, 2)
    for b in pf.J.domain.basis:
        assert np.array_equal(pf.j_fn(b), b)
    pf = pad_factorization(1, 2)
    out = pf.j_fn(diag(3, 3))
    assert np.allclose(out, diag(3, 3, 3, 3))
    assert np.allclose(pf.q_fn(diag(1, 2, 3, 4)), diag(1, 3))


def test_pad_random_state(rng):
    r1 = np.diag(rng.uniform(0.1, 1, 2))
    r2 = np.diag(rng.uniform(0.1, 1, 2))
    tot = np.trace(r1) + np.trace(r2)
    pf = pad_factorization(2, 3, (r1 / tot, r2 / tot))
    assert pf.roundtrip_defect() == 0.0
    assert cp_check(pf.J).cp


# --- dual coproduct package -----------------------------------------------------------------

def test_dual_package_single_pair():
    cs = coproduct([pair_algebra(1)])
    pkg = dual_coproduct(cs)
    assert pkg.K.dim == 2
    for a, b in [(1.0, 0.0), (0.0, 1.0), (0.3, 0.7)]:
        assert np.isclose(pkg.omega(diag(a, b)), (a + b) / 2)


@pytest.mark.parametrize("ks", [(1, 1), (2, 2), (1, 2, 2)])
def test_dual_package_identities(rng, ks):
    cs = coproduct([pair_algebra(k) for k in ks])
    pkg = dual_coproduct(cs)
    assert np.isclose(pkg.omega(np.eye(pkg.K.amb)), len(ks))
    samples = [random_element(rng, cs, n) for n in (1, 2)]
    rep = check_package(pkg, samples)
    assert rep["unit_to_omega"] <= 1e-12
    assert rep["trace_ratio"] <= 1e-12
    assert rep["diagram"] <= 1e-10
    # Λ(unit placed at any component) pairs to ω on K's basis
    for i, c in enumerate(cs.components):
        lam = pkg.lam(cs.embed(i, np.eye(c.amb)))
        for v, s in zip(lam.values, pkg.K.basis):
            assert abs(v[0, 0] - pkg.omega(s)) <= 1e-12


# --- perturbed lifting -------------------------------------------------------------------------

def test_perturbed_lift_instance(rng):
    inst = random_lift_instance(rng)
    res = perturbed_lift(inst.phi, inst.q, inst.density, 0.01)
    assert res is not None
    assert res.verdict.cp
    assert res.lam > 0
    for v in res.lift.values:
        assert np.abs(v - v.conj().T).max() <= 1e-9
    # the lift differs from phi by kernel elements only
    for b in inst.phi.domain.basis:
        d = res.lift.apply(b) - inst.phi.apply(b)
        assert quotient_membership(inst.q, d, 1, 1e-9).member
        assert quotient_membership(inst.q, -d, 1, 1e-9).member
