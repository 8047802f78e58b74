from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings, strategies as st

from qcalc.forms import Form, FormSpace, exterior_d, iterate_d
from qcalc.nilpotency import (
    BadIndexCount,
    dk_expand,
    l_poly,
    reduce_form,
    verify_dN_zero,
    verify_l_conditions,
)
from qcalc.scalar import CyclotomicField
from qcalc.symfun import CoeffPoly, parse_poly, random_poly

seeds = st.integers(min_value=0, max_value=10 ** 6)


def sym(space, letters, coeff=1):
    """Average of the word over all orderings of its index slots, orders held in place."""
    orders = [a for a, _ in letters]
    idx = [i for _, i in letters]
    perms = list(permutations(idx))
    acc = space.zero()
    for p in perms:
        acc = acc + space.monomial(tuple(zip(orders, p)))
    return acc.scale(space.field.coerce(coeff) * Fraction(1, len(perms)))


@pytest.mark.parametrize("N", [3, 4])
def test_l2_is_symmetrized_square(N):
    raw = FormSpace(N, 2, "raw")
    assert l_poly(2, (0, 1), N=N) == sym(raw, [(1, 0), (1, 1)])
    assert l_poly(2, (1, 1), N=N) == raw.monomial(((1, 1), (1, 1)))


def test_l3_pair_golden():
    raw = FormSpace(3, 2, "raw")
    q = raw.field.q
    want = sym(raw, [(2, 0), (1, 1)]) + sym(raw, [(1, 0), (2, 1)], 1 + q)
    assert l_poly(3, (0, 1)) == want


def test_l4_pair_golden():
    raw = FormSpace(4, 2, "raw")
    q = raw.field.q
    c = 1 + q + q * q
    want = sym(raw, [(3, 0), (1, 1)]) + sym(raw, [(2, 0), (2, 1)], c) + sym(raw, [(1, 0), (3, 1)], c)
    assert l_poly(4, (0, 1), N=4) == want


def test_l_boundary_cases():
    raw = FormSpace(4, 3, "raw")
    assert l_poly(3, (2,), N=4, n=3) == raw.d(3, 2)
    assert l_poly(3, (0, 2, 1), N=4, n=3) == sym(raw, [(1, 0), (1, 2), (1, 1)])
    with pytest.raises(BadIndexCount):
        l_poly(2, (0, 1, 2))
    with pytest.raises(BadIndexCount):
        l_poly(2, ())


@pytest.mark.parametrize("k", [1, 2, 3])
def test_l_poly_is_symmetric_and_homogeneous(k):
    for idx in [(0, 1, 2)[:k], (2, 0, 1)[:k], (1, 1, 0)[:k]]:
        L = l_poly(k, idx, n=3)
        assert all(sum(a for a, _ in w) == k for w in L.terms)
        for p in permutations(idx):
            assert l_poly(k, p, n=3) == L


def test_dk_expand_low_orders():
    f = parse_poly("x1^2*x2 + 3*x2^2 - x1", 2)
    raw = FormSpace(3, 2, "raw")
    want1 = raw.zero()
    for i in range(2):
        want1 = want1 + raw.monomial(((1, i),), f.partial(i))
    assert dk_expand(f, 1) == want1
    want2 = raw.zero()
    for i in range(2):
        want2 = want2 + raw.monomial(((2, i),), f.partial(i))
        for j in range(2):
            want2 = want2 + sym(raw, [(1, i), (1, j)]).scale(f.partial(i).partial(j))
    assert dk_expand(f, 2) == want2


@pytest.mark.parametrize("N,n", [(3, 1), (3, 2), (3, 3), (4, 1), (4, 2)])
@settings(max_examples=15)
@given(seeds)
def test_dk_expand_equals_iterated_d(N, n, seed):
    f = random_poly(seed, n, 3, order=N)
    raw = FormSpace(N, n, "raw")
    g = raw.function(f)
    for k in range(1, N + 1):
        g = exterior_d(g)
        assert dk_expand(f, k, N=N) == g, k


def test_dN_examples():
    t3 = parse_poly("x1*x2", 2)
    assert iterate_d(FormSpace(3, 2).function(t3), 3).is_zero()
    const = CoeffPoly.constant(CyclotomicField(3), 2, 5)
    assert exterior_d(FormSpace(3, 2).function(const)).is_zero()
    cube = parse_poly("x1^3", 1, order=4)
    assert iterate_d(FormSpace(4, 1).function(cube), 4).is_zero()
    # the same function is not killed without the relations
    assert not iterate_d(FormSpace(4, 1, "raw").function(cube), 4).is_zero()


def test_dN_fails_without_relations():
    f = parse_poly("x1*x2", 2)
    assert not iterate_d(FormSpace(3, 2, "raw").function(f), 3).is_zero()


@pytest.mark.parametrize("N,n", [(3, 1), (3, 2), (3, 3), (4, 1), (4, 2)])
def test_verify_dN_zero_reports(N, n):
    rep = verify_dN_zero(N, n, trials=5, seed=2)
    assert len(rep.checks) == 5 and rep.passed


def test_verify_dN_zero_deterministic():
    a = verify_dN_zero(3, 2, trials=4, seed=9).to_json()
    assert a == verify_dN_zero(3, 2, trials=4, seed=9).to_json()


@pytest.mark.parametrize("N,n,count", [(3, 2, 9), (3, 3, 19), (4, 2, 14)])
def test_conditions_vanish(N, n, count):
    rep = verify_l_conditions(N, n)
    assert len(rep.checks) == count
    assert rep.passed, rep.failures()


def test_conditions_vanish_for_five():
    assert verify_l_conditions(5, 2).passed


def test_conditions_are_nonzero_before_reduction():
    L = l_poly(3, (0, 1))
    assert not L.is_zero()
    assert reduce_form(L).is_zero()
    assert not reduce_form(L, "raw").is_zero()
