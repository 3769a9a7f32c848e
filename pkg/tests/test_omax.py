from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opsyskit.errors import InvalidInput, NotPSD, ZeroSecondBlock
from opsyskit.omax_demo import (UNIT, lowest_height, no_lift_proof, omax_lift, random_target,
                                v_membership)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 3.0, 1e6])
def test_unit_ray_in_cone(t):
    assert v_membership(*(t * c for c in UNIT))


def test_membership_examples():
    assert not v_membership(0.0, 1.0, 1.0)
    assert v_membership(0.0, 0.0, 0.0)
    assert not v_membership(1.0, -0.1, 5.0)
    assert not v_membership(-1.0, 0.0, -0.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0, 1e3))
def test_lowest_height_is_tight(x, y):
    z = lowest_height(x, y)
    assert v_membership(x, y, z)
    below = float(np.nextafter(z, -np.inf))
    # the exact boundary is (x² + y²)/(2x); one ulp lower falls outside or touches it
    exact = (Fraction(x) ** 2 + Fraction(y) ** 2) / (2 * Fraction(x))
    assert Fraction(below) <= exact
    assert Fraction(z) >= exact


def test_lowest_height_rejects_boundary():
    with pytest.raises(InvalidInput):
        lowest_height(0.0, 1.0)
    assert lowest_height(0.0, 0.0) == 0.0


def test_unit_target_lift():
    lift = omax_lift(np.eye(1), np.eye(1), 0.1)
    assert lift.audit_ok
    assert all(t.in_cone for t in lift.terms)
    x, y, z = lift.element()
    assert np.isclose(x[0, 0].real, 1.1) and np.isclose(y[0, 0].real, 1.1)
    assert lift.projection_defect <= 1e-15
    heights = [t.vector[2] for t in lift.terms]
    assert heights[0] == 0.5
    assert heights[2] == 1.25


def test_zero_second_block():
    with pytest.raises(ZeroSecondBlock):
        omax_lift(np.eye(2), np.zeros((2, 2)), 0.1)


def test_lift_rejects_bad_input():
    with pytest.raises(NotPSD):
        omax_lift(-np.eye(1), np.eye(1), 0.1)
    with pytest.raises(InvalidInput):
        omax_lift(np.eye(1), np.eye(1), 0.0)


def test_random_targets(rng):
    for n in (1, 2, 3):
        for _ in range(10):
            a1, a2 = random_target(rng, n)
            lift = omax_lift(a1, a2, 0.05)
            assert lift.audit_ok, lift.notes
            scale = max(1.0, np.abs(a1).max(), np.abs(a2).max())
            assert lift.projection_defect <= 1e-12 * scale
            for term in lift.terms:
                assert np.linalg.eigvalsh(term.coefficient)[0] >= -1e-12 * scale


@pytest.mark.parametrize("v", [1.0, 0.5, 0.001])
def test_no_lift_proof(v):
    rec = no_lift_proof(v)
    assert rec.impossible
    assert rec.gap == pytest.approx(v * v)
    assert rec.target == (0.0, v)
    for z in (0.0, 1.0, 1e3, -2.0):
        assert not v_membership(0.0, v, z)


def test_no_lift_requires_positive_norm():
    with pytest.raises(InvalidInput):
        no_lift_proof(0.0)


def test_boundary_target_is_the_limit(rng):
    # lifts of (s, v) exist for every s > 0, with height growing like v²/(2s)
    v = 0.5
    heights = [lowest_height(s, v) for s in (1e-1, 1e-2, 1e-3)]
    assert heights[0] < heights[1] < heights[2]
    assert heights[2] >= v * v / (2e-3)
