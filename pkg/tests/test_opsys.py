import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opsyskit.constructions import matrix_pair_system
from opsyskit.errors import DependentBasis, ShapeMismatch, UnitNotInSpan
from opsyskit.numerics.linalg import random_hermitian, random_psd
from opsyskit.opsys import (CpMap, choi_matrix, compose, cp_check, cp_extend, dual_matrix_iso, element,
                            ell_inf, functional_of, level_membership, make_system, map_from_choi,
                            map_from_function, matrix_algebra, state_map, unit_element, unitalize_lift)
from opsyskit.opsys.maps import verify_extension, verify_witness

SZ = np.diag([1.0, -1.0])
SX = np.array([[0.0, 1.0], [1.0, 0.0]])


def random_choi_map(rng, p, q, floor=0.0):
    return map_from_choi(random_psd(rng, p * q) + floor * np.eye(p * q), p, q)


# --- systems ------------------------------------------------------------------------------

def test_make_system_pauli_span():
    s = make_system([2], [np.eye(2), SZ, SX], 0)
    assert s.dim == 3
    assert s.amb == 2


def test_make_system_dependent():
    with pytest.raises(DependentBasis):
        make_system([2], [np.eye(2), np.eye(2)])


def test_make_system_ell_inf_two():
    s = make_system([1, 1], [np.eye(2), SZ])
    assert s.dim == 2 and s.blocks == (1, 1)
    assert s.unit_index == 0


def test_make_system_rejects_off_block_and_missing_unit():
    with pytest.raises(ShapeMismatch):
        make_system([1, 1], [np.eye(2), SX])
    with pytest.raises(UnitNotInSpan):
        make_system([2], [SZ, SX])


def test_level_membership_examples():
    s = ell_inf(2)
    for n in (1, 2, 3):
        assert level_membership(unit_element(s, n)).member
    assert level_membership(element(s, SZ)).non_member
    one = ell_inf(1)
    x = element(one, np.array([[2.0, 1.0], [1.0, 2.0]]), 2)
    assert level_membership(x).member


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 5), st.integers(1, 2))
def test_level_membership_monotone(seed, t, n):
    rng = np.random.default_rng(seed)
    s = matrix_algebra(2)
    h = random_hermitian(rng, 2 * n)
    h = h - np.linalg.eigvalsh(h)[0] * np.eye(2 * n)  # on the boundary of the cone
    x = element(s, h, n)
    if level_membership(x).member:
        assert level_membership(element(s, h + t * np.eye(2 * n), n)).member


# --- CP extension and checking -----------------------------------------------------------------

def test_identity_extension_is_entangled_projector():
    m = matrix_algebra(2)
    phi = CpMap(m, m, m.basis)
    v = cp_extend(phi)
    assert v.cp
    c = v.extension(phi).matrix
    expected = choi_matrix(lambda x: x, 2)
    assert np.allclose(c, expected, atol=1e-7)
    assert np.allclose(np.sort(np.linalg.eigvalsh(expected)), [0, 0, 0, 2])


def test_transpose_not_cp():
    m = matrix_algebra(2)
    phi = map_from_function(m, m, lambda x: x.T)
    v = cp_check(phi)
    assert v.not_cp
    level, x = v.witness
    assert verify_witness(phi, v.info["block"], level, x, 1e-8)
    assert np.isclose(np.linalg.eigvalsh(choi_matrix(lambda x: x.T, 2))[0], -1.0)


def test_diagonal_average_extends():
    dom = make_system([2], [np.eye(2), SZ])
    cod = matrix_algebra(2)
    phi = map_from_function(dom, cod, lambda x: np.trace(x) / 2 * np.eye(2))
    v = cp_extend(phi)
    assert v.cp
    ext = v.extension(phi)
    for b in dom.basis:
        assert np.allclose(ext.apply(b), phi.apply(b), atol=1e-8)
    assert np.linalg.eigvalsh(ext.matrix)[0] >= -1e-8
    # the explicit extension trace/2 ⊗ identity also agrees on the domain
    for b in dom.basis:
        assert np.allclose(np.trace(b) / 2 * np.eye(2), phi.apply(b))


def test_state_is_cp(rng):
    s = matrix_algebra(3)
    rho = random_psd(rng, 3)
    rho /= np.trace(rho)
    v = cp_check(state_map(s, rho))
    assert v.cp
    assert verify_extension(state_map(s, rho), v.choi_blocks, 1e-8)[0]


@pytest.mark.parametrize("k", [1, 2])
def test_matrix_pair_isomorphism_cp(k):
    model = matrix_pair_system(k)
    assert cp_check(model.forward).cp
    assert cp_check(model.backward).cp


def test_swap_negate_not_cp():
    s = ell_inf(2)
    phi = map_from_function(s, s, lambda x: np.diag([x[1, 1], -x[0, 0]]))
    v = cp_check(phi)
    assert v.not_cp
    level, x = v.witness
    assert level == 1
    assert np.linalg.eigvalsh(x)[0] >= -1e-12
    assert np.linalg.eigvalsh(phi.apply(x))[0] < 0


def test_composition_closure(rng):
    for _ in range(5):
        phi = random_choi_map(rng, 2, 3)
        psi = random_choi_map(rng, 3, 2)
        assert cp_check(phi).cp and cp_check(psi).cp
        assert cp_check(compose(psi, phi)).cp


def test_choi_oracle_agrees(rng):
    for _ in range(10):
        p, q = rng.integers(1, 4, size=2)
        c = random_hermitian(rng, p * q)
        c = c + (rng.choice([-0.3, 0.3]) - np.linalg.eigvalsh(c)[0]) * np.eye(p * q)
        v = cp_check(map_from_choi(c, p, q))
        assert v.cp == (np.linalg.eigvalsh(c)[0] >= 0)


# --- duality and unitalization -------------------------------------------------------------------

def test_dual_matrix_iso_examples():
    gamma, inv = dual_matrix_iso(2)
    e11 = np.diag([1.0, 0.0])
    e22 = np.diag([0.0, 1.0])
    f = functional_of(gamma.apply(e11))
    assert abs(f(e11) - 1) <= 1e-14
    assert abs(f(e22)) <= 1e-14
    for b in gamma.domain.basis:
        assert np.abs(inv.apply(gamma.apply(b)) - b).max() <= 1e-14


def test_dual_matrix_iso_psd_to_positive(rng):
    gamma, _ = dual_matrix_iso(3)
    for _ in range(20):
        f = functional_of(gamma.apply(random_psd(rng, 3)))
        assert f(random_psd(rng, 3)).real >= -1e-8


def test_unitalize_already_unital(rng):
    s = matrix_algebra(2)
    phi = CpMap(s, s, s.basis)
    omega = state_map(s, np.eye(2) / 2)
    assert unitalize_lift(phi, omega) is phi


def test_unitalize_doubled_state():
    s = ell_inf(1)
    phi = map_from_function(s, matrix_algebra(2), lambda x: 2 * x[0, 0] * np.eye(2))
    omega = state_map(s, np.eye(1))
    out = unitalize_lift(phi, omega)
    assert out.unit_defect() <= 1e-12
    assert cp_check(out).cp


def test_unitalize_small_defect(rng):
    for scale in (1e-2, 1e-3):
        ident = choi_matrix(lambda x: x, 2)
        phi = map_from_choi(ident + scale * random_psd(rng, 4), 2, 2)
        s = phi.domain
        omega = state_map(s, np.eye(2) / 2)
        h = phi.apply(s.unit) - s.unit
        out = unitalize_lift(phi, omega)
        assert out.unit_defect() <= 1e-12
        assert cp_check(out).cp
        gap = max(np.abs(a - b).max() for a, b in zip(out.values, phi.values))
        assert gap <= 5 * np.linalg.norm(h, 2)
