import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opsyskit.constructions import coproduct, coproduct_membership, pair_algebra
from opsyskit.errors import InsufficientMargin, InvalidInput, MissingBlocks, NotPSD
from opsyskit.numerics.linalg import random_hermitian, random_psd
from opsyskit.opsys import ell_inf, full_algebra, matrix_algebra
from opsyskit.tensor import (MaxCertificate, TensorElement, dmax_check, kirchberg_certify,
                             max_certificate_from_psd, max_witness, min_membership, nc_factorization,
                             product_element, psd_to_dmax, random_min_positive, tensor_element,
                             unit_tensor, verify_witness)


def swap_matrix(d):
    s = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            s[a * d + b, b * d + a] = 1.0
    return s


def entangled(d):
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return np.outer(v, v).astype(complex)


def trivial_certificate(left, right, p, q):
    return MaxCertificate(left, right, 1, 1, 1, np.ones((1, 1), dtype=complex), p, q)


# --- minimal cone ------------------------------------------------------------------------------

def test_min_membership_examples():
    m2 = matrix_algebra(2)
    assert min_membership(unit_tensor(m2, m2)).member
    e11 = np.diag([1.0, 0.0])
    assert min_membership(tensor_element(m2, m2, np.kron(e11, e11))).member
    assert min_membership(tensor_element(m2, m2, entangled(2))).member
    assert min_membership(tensor_element(m2, m2, swap_matrix(2))).non_member


def test_min_membership_coproduct_left(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    z = random_min_positive(cs, 2, rng, margin=0.1)
    assert min_membership(z).member
    z_neg = random_min_positive(cs, 2, rng, margin=-0.1)
    assert min_membership(z_neg).non_member


# --- maximal cone certificates ------------------------------------------------------------------

def test_dmax_trivial_certificate():
    m2 = matrix_algebra(2)
    cert = trivial_certificate(m2, m2, np.eye(2), np.eye(2))
    rep = dmax_check(cert, unit_tensor(m2, m2))
    assert rep.ok and rep.residual == 0.0 and rep.delta == 0.0


def test_dmax_corrupted_alpha():
    m2 = matrix_algebra(2)
    cert = trivial_certificate(m2, m2, np.eye(2), np.eye(2))
    cert.alpha = np.array([[1.5 + 0.0j]])
    rep = dmax_check(cert, unit_tensor(m2, m2))
    assert not rep.ok
    assert rep.residual > 0 or abs(rep.delta) > 0


def test_psd_to_dmax_product():
    m2 = matrix_algebra(2)
    e = np.diag([1.0, 0.0])
    w = np.kron(e, e)
    alpha, p, k = psd_to_dmax(w, 1, [2], 2)
    assert alpha.shape[1] == k * 2
    assert np.count_nonzero(np.abs(alpha) > 1e-12) >= 1
    cert = max_certificate_from_psd(m2, m2, w, 1)
    assert dmax_check(cert, tensor_element(m2, m2, w)).ok


@pytest.mark.parametrize("w", [entangled(2), np.eye(4)])
def test_psd_to_dmax_examples(w):
    m2 = matrix_algebra(2)
    cert = max_certificate_from_psd(m2, m2, w, 1)
    rep = dmax_check(cert, tensor_element(m2, m2, w))
    assert rep.ok and rep.residual <= 1e-10


def test_psd_to_dmax_rejects_indefinite():
    with pytest.raises(NotPSD):
        psd_to_dmax(swap_matrix(2).astype(complex), 1, [2], 2)


def test_psd_to_dmax_round_trip(rng):
    for i in range(100):
        blocks = [int(b) for b in rng.integers(1, 3, size=rng.integers(1, 3))]
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 3))
        if n * sum(blocks) * d > 64:
            continue
        left = full_algebra(blocks)
        right = matrix_algebra(d)
        amb = sum(blocks)
        w = np.zeros((n, amb, d, n, amb, d), dtype=complex)
        o = 0
        for b in blocks:
            sl = slice(o, o + b)
            w[:, sl, :, :, sl, :] = random_psd(rng, n * b * d).reshape(n, b, d, n, b, d)
            o += b
        w = w.reshape(n * amb * d, n * amb * d)
        cert = max_certificate_from_psd(left, right, w, n)
        rep = dmax_check(cert, tensor_element(left, right, w, n))
        assert rep.ok
        assert rep.residual <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2), st.integers(1, 2))
def test_product_positivity(seed, k, l):
    rng = np.random.default_rng(seed)
    left, right = matrix_algebra(2), matrix_algebra(2)
    p = random_psd(rng, 2 * k)
    q = random_psd(rng, 2 * l)
    z = tensor_element(left, right, product_element(p, k, q, l, 2, 2), k * l)
    scale = max(1.0, float(np.abs(z.data).max()))
    assert min_membership(z, tol=1e-10 * scale).member
    cert = MaxCertificate(left, right, k * l, k, l, np.eye(k * l, dtype=complex), p, q)
    assert dmax_check(cert, z).ok


# --- witnesses -------------------------------------------------------------------------------

def test_max_witness_unit():
    m2 = matrix_algebra(2)
    assert max_witness(unit_tensor(m2, m2)) is None


def test_max_witness_swap():
    m2 = matrix_algebra(2)
    z = tensor_element(m2, m2, swap_matrix(2))
    w = max_witness(z)
    assert w is not None
    assert verify_witness(w, z, 0.0, 1e-8)
    assert w.evaluate(z) < 0
    # the antisymmetric vector state: nonnegative on products, -1 on the swap
    v = np.array([0, 1, -1, 0]) / np.sqrt(2)
    assert np.isclose(v @ swap_matrix(2) @ v, -1.0)
    for _ in range(5):
        rng = np.random.default_rng(_)
        assert v @ np.kron(random_psd(rng, 2), random_psd(rng, 2)) @ v >= -1e-12


def test_max_witness_rejects_proper_right_factor():
    z = unit_tensor(matrix_algebra(2), ell_inf(2))
    with pytest.raises(InvalidInput):
        max_witness(z)


# --- Kirchberg pipeline ------------------------------------------------------------------------

def test_kirchberg_unit():
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    z = unit_tensor(cs, matrix_algebra(2))
    res = kirchberg_certify(cs, 2, z)
    rep = dmax_check(res.certificate, z)
    assert rep.ok and rep.residual <= 1e-10


def test_kirchberg_smallest_product(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    d = 2
    a = np.diag(rng.uniform(0.2, 1.0, 2)).astype(complex)
    b = random_psd(rng, d) + 0.2 * np.eye(d)
    z = TensorElement(cs, matrix_algebra(d), 1, (np.kron(a, b), np.zeros((4, 4), dtype=complex)))
    res = kirchberg_certify(cs, d, z)
    rep = dmax_check(res.certificate, z)
    assert rep.ok and rep.residual <= 1e-8
    assert max_witness(z) is None


@pytest.mark.parametrize("ks,d", [((2, 2), 2), ((1, 2), 3)])
def test_kirchberg_random(rng, ks, d):
    cs = coproduct([pair_algebra(k) for k in ks])
    for _ in range(3):
        z = random_min_positive(cs, d, rng, margin=0.1)
        res = kirchberg_certify(cs, d, z)
        rep = dmax_check(res.certificate, z)
        assert rep.ok and rep.residual <= 1e-8 and abs(rep.delta) <= 1e-6
        # max ⊆ min at certified points
        assert min_membership(z).member
        assert max_witness(z) is None


def test_kirchberg_rejects_non_positive(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(2)])
    z = random_min_positive(cs, 2, rng, margin=-0.05)
    with pytest.raises(InvalidInput):
        kirchberg_certify(cs, 2, z)
    w = max_witness(z)
    assert w is not None and verify_witness(w, z, 0.0, 1e-8)


def test_kirchberg_margin_floor(rng):
    cs = coproduct([pair_algebra(1), pair_algebra(1)])
    z = random_min_positive(cs, 2, rng, margin=0.1)
    with pytest.raises(InsufficientMargin):
        kirchberg_certify(cs, 2, z, eps=1e-12)


# --- factorization through the pair coproduct ----------------------------------------------

def test_nc_factorization():
    cs = coproduct([pair_algebra(2), pair_algebra(3)])
    nf = nc_factorization(cs)
    assert nf.roundtrip_defect() <= 1e-12
    src = nf.source
    x = src.element([np.diag([1.0, 0.0]), np.zeros((3, 3))])
    back = nf.psi.apply(nf.phi.apply(x))
    assert all(np.allclose(a, b, atol=1e-12) for a, b in zip(back.parts, x.parts))
    u = nf.psi.apply(nf.phi.apply(src.unit()))
    assert all(np.allclose(a, b) for a, b in zip(u.parts, src.unit().parts))
    for f in (nf.phi, nf.psi):
        chk = f.check()
        assert chk["unital"] and chk["cp"]


def test_nc_factorization_extra_component():
    cs = coproduct([pair_algebra(1), pair_algebra(3), pair_algebra(2)])
    nf = nc_factorization(cs)
    assert nf.roundtrip_defect() <= 1e-12
    assert nf.psi.check()["cp"]


def test_nc_factorization_transports_positivity(rng):
    cs = coproduct([pair_algebra(2), pair_algebra(3)])
    nf = nc_factorization(cs)
    src = nf.source
    parts = [np.diag(rng.uniform(-1, 1, c.amb)).astype(complex) for c in src.components]
    x = src.element(parts)
    v_src = coproduct_membership(x.shifted(2.5))
    v_img = coproduct_membership(nf.phi.apply(x.shifted(2.5)))
    assert v_src.member and v_img.member


def test_nc_factorization_missing_blocks():
    with pytest.raises(MissingBlocks):
        nc_factorization(coproduct([pair_algebra(2), pair_algebra(2)]))
