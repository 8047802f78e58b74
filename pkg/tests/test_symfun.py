import pytest
import sympy
from hypothesis import given, strategies as st

from qcalc.scalar import CyclotomicField
from qcalc.symfun import (
    AxisOutOfRange,
    CoeffPoly,
    MismatchedArity,
    NonInvertibleChart,
    PolyMap,
    compose,
    parse_poly,
    random_poly,
)

F = CyclotomicField(3)
x1 = CoeffPoly.variable(F, 2, 0)
x2 = CoeffPoly.variable(F, 2, 1)

seeds = st.integers(min_value=0, max_value=10 ** 6)


def to_sympy(p: CoeffPoly, syms):
    # rational coefficients only
    expr = 0
    for exps, c in p.terms.items():
        term = sympy.Rational(c.to_fraction().numerator, c.to_fraction().denominator)
        for s, e in zip(syms, exps):
            term *= s ** e
        expr += term
    return sympy.expand(expr)


def test_arith_examples():
    assert x1 * x1 == x1 ** 2
    f = random_poly(3, 2, 3)
    assert (f + f.scale(-1)).is_zero()
    assert (x1 + x2) * (x1 - x2) == x1 ** 2 - x2 ** 2


def test_partial_examples():
    assert (x1 ** 3).partial(0) == (x1 ** 2).scale(3)
    assert (x1 * x2).partial(1) == x1
    with pytest.raises(AxisOutOfRange):
        x1.partial(2)


def test_mismatched_arity():
    with pytest.raises(MismatchedArity):
        x1 + CoeffPoly.variable(F, 3, 0)


def test_random_poly_golden_and_determinism():
    assert str(random_poly(7, 2, 3)) == "-5/3*x1*x2^2 - 5/3*x2^3 - 2/3*x1^2 - 2*x1*x2 + 3*x2^2 - 2*x1 - 3/2"
    assert random_poly(11, 3, 4) == random_poly(11, 3, 4)
    assert random_poly(5, 2, 0).is_constant()


@given(seeds, seeds)
def test_product_matches_sympy(s1, s2):
    f, g = random_poly(s1, 2, 3), random_poly(s2, 2, 3)
    a, b = sympy.symbols("a b")
    assert to_sympy(f * g, (a, b)) == sympy.expand(to_sympy(f, (a, b)) * to_sympy(g, (a, b)))
    assert to_sympy(f.partial(1), (a, b)) == sympy.diff(to_sympy(f, (a, b)), b)


@given(seeds, seeds)
def test_ring_laws_and_derivation(s1, s2):
    f, g, h = random_poly(s1, 3, 3), random_poly(s2, 3, 2), random_poly(s1 + s2, 3, 2)
    assert f * (g + h) == f * g + f * h
    assert (f * g) * h == f * (g * h)
    for i in range(3):
        assert (f * g).partial(i) == f.partial(i) * g + f * g.partial(i)


@given(seeds)
def test_partials_commute(s):
    f = random_poly(s, 3, 4)
    for i in range(3):
        for j in range(3):
            assert f.partial(i).partial(j) == f.partial(j).partial(i)


CHARTS = [
    PolyMap.identity(2),
    PolyMap.shear(2, 1, 0),
    PolyMap.affine([[2, 1], [1, 1]], [3, -1]),
    PolyMap.shear(2, 1, 0).compose_after(PolyMap.affine([[1, 2], [0, 1]], [1, 0])),
]


@pytest.mark.parametrize("chart", CHARTS)
@given(seeds)
def test_compose_round_trip_and_chain_rule(chart, s):
    f = random_poly(s, 2, 3)
    g = compose(f, chart, "forward")
    assert compose(g, chart, "inverse") == f
    # chain rule for f(x(y)) in y
    fy = compose(f, chart, "inverse")
    U = chart.jacobian_inverse()
    for j in range(2):
        want = CoeffPoly.zero(F, 2)
        for k in range(2):
            want = want + compose(f.partial(k), chart, "inverse") * U[k][j]
        assert fy.partial(j) == want


def test_compose_examples():
    f = random_poly(2, 2, 3)
    assert compose(f, PolyMap.identity(2), "forward") == f
    shear = PolyMap.shear(2, 1, 0)
    assert shear.forward[0] == x1
    assert shear.forward[1] == x2 + x1 ** 2


def test_non_invertible_chart_rejected():
    with pytest.raises(NonInvertibleChart):
        PolyMap([x1, x2 + x1 ** 2], [x1, x2])
    with pytest.raises((NonInvertibleChart, ZeroDivisionError, ValueError)):
        PolyMap.affine([[1, 1], [1, 1]])


@given(seeds)
def test_parse_print_round_trip(s):
    f = random_poly(s, 3, 3)
    assert parse_poly(str(f), 3) == f


def test_parse_examples():
    q = F.q
    got = parse_poly("2*x1^2*x2 + (1+q)*x3 - 1/2", 3)
    assert got.terms[(0, 0, 1)] == 1 + q
    assert got.terms[(2, 1, 0)] == F.rational(2)
    assert got.terms[(0, 0, 0)] == F.parse("-1/2")
    assert len(got.terms) == 3


def test_evaluate_and_float_function():
    f = parse_poly("x1^2 + 3*x2", 2)
    assert f.evaluate((2, 1)) == F.rational(7)
    assert f.to_float_function()((0.5, 2.0)) == pytest.approx(6.25)
