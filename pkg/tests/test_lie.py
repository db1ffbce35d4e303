from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import freudenthal_dim
from twistedk.lie import (
    InadmissibleError,
    RootSystemA,
    congruence_table,
    cyclic_order_bound,
    inner,
    known_cyclic_order,
    level_weight,
    su3_brane_degree_check,
    weyl_dim,
)


def test_cartan_matrix_from_roots():
    rs = RootSystemA(3)
    for a, b in itertools.product(range(3), repeat=2):
        expected = 2 if a == b else (-1 if abs(a - b) == 1 else 0)
        assert inner(rs.simple_roots[a], rs.simple_roots[b]) == expected
        assert inner(rs.fundamental_weights[a], rs.simple_roots[b]) == (1 if a == b else 0)


def test_small_dimensions():
    assert weyl_dim(RootSystemA(1), [3]) == 4
    assert weyl_dim(RootSystemA(2), [1, 0]) == 3
    assert weyl_dim(RootSystemA(2), [1, 1]) == 8
    assert weyl_dim(RootSystemA(3), [0, 1, 0]) == 6


@given(st.integers(1, 3).flatmap(lambda n: st.lists(st.integers(0, 3), min_size=n, max_size=n)))
def test_weyl_dim_matches_freudenthal(coeffs):
    assert weyl_dim(RootSystemA(len(coeffs)), coeffs) == freudenthal_dim(len(coeffs), tuple(coeffs))


def test_dual_representation_has_same_dimension():
    rs = RootSystemA(3)
    for c in itertools.product(range(4), repeat=3):
        assert weyl_dim(rs, c) == weyl_dim(rs, c[::-1])


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        weyl_dim(RootSystemA(2), [-1, 0])


@pytest.mark.parametrize("k", range(2, 13))
def test_su2_bound_is_k(k):
    assert cyclic_order_bound(RootSystemA(1), k) == k == known_cyclic_order(1, k)


@pytest.mark.parametrize("k", [4, 6, 8, 10])
def test_su3_congruence(k):
    rs = RootSystemA(2)
    for subset, dim in congruence_table(rs, k):
        assert (dim - 1) % (k // 2) == 0, subset
    assert cyclic_order_bound(rs, k) % (k // 2) == 0


def test_level_weight():
    assert level_weight(3, 5, (1, 3)) == [5, 0, 5]
    with pytest.raises(ValueError):
        level_weight(2, 1, (3,))


def test_su3_branes():
    value, bound = su3_brane_degree_check(4, Fraction(1, 2))
    assert bound == 2 and value == 0
    with pytest.raises(InadmissibleError):
        su3_brane_degree_check(4, 1)
    with pytest.raises(InadmissibleError):
        su3_brane_degree_check(5, Fraction(1, 2))
    assert known_cyclic_order(2, 5) is None
