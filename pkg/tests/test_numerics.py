from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rrlab.numerics import (IntervalSet, LineMeasure, OutOfRange, PiecewiseLinear, StepFunction, format_rational,
                            integral_on, integrate, l2_distance, parse_rational)

from conftest import interval_sets, rationals, step_functions


@given(interval_sets(), interval_sets())
def test_inclusion_exclusion(a, b):
    assert a.union(b).measure() + a.intersect(b).measure() == a.measure() + b.measure()


@given(interval_sets())
def test_complement_partitions_unit(a):
    c = a.complement(1)
    assert not a.intersect(c)
    assert a.measure() + c.measure() == 1
    assert c.complement(1) == a


@given(interval_sets(), interval_sets())
def test_subtract_is_intersect_complement(a, b):
    assert a.subtract(b) == a.intersect(b.complement(1))
    assert a.subtract(b).issubset(a)


@given(interval_sets(), rationals(-1, 1))
def test_translate_preserves_measure(a, t):
    try:
        moved = a.translate(t)
    except OutOfRange:
        return
    assert moved.measure() == a.measure()


def test_canonical_merging():
    s = IntervalSet.of((0, Fraction(1, 4)), (Fraction(1, 4), Fraction(1, 2)), (Fraction(3, 4), 1))
    assert s.intervals == ((0, Fraction(1, 2)), (Fraction(3, 4), 1))
    assert s.contains(Fraction(1, 4)) and not s.contains(Fraction(1, 2))


@given(rationals(-3, 3, max_den=1000))
def test_rational_round_trip(q):
    assert parse_rational(format_rational(q)) == q


@given(step_functions(), step_functions())
def test_step_arithmetic(f, g):
    x = Fraction(5, 17)
    assert (f + g)(x) == f(x) + g(x)
    assert (f - g).integral() == f.integral() - g.integral()
    assert f.integral() == integral_on(f, 0, 1)


@given(step_functions())
def test_l2_distance_of_steps(f):
    direct = sum((b - a) * v * v for a, b, v in f.pieces())
    assert l2_distance(f, StepFunction.constant(0)) == direct


def test_piecewise_linear_integral():
    f = PiecewiseLinear((0, Fraction(1, 2), 1), (0, 1, 0))
    assert integral_on(f, 0, 1) == Fraction(1, 2)
    assert f.lipschitz() == 2
    assert integrate(f, LineMeasure.lebesgue()) == Fraction(1, 2)
    assert integrate(f, LineMeasure.dirac(Fraction(1, 4))) == Fraction(1, 2)


def test_measure_rejects_negative_mass():
    with pytest.raises(ValueError):
        LineMeasure(((0, -1),))


@given(st.lists(st.tuples(rationals(), st.integers(1, 5)), min_size=1, max_size=5), rationals())
def test_cdf_matches_mass(atoms, t):
    m = LineMeasure(tuple((x, Fraction(w)) for x, w in atoms))
    assert m.cdf(t) == m.mass_of(IntervalSet.of((0, t + Fraction(1, 10**9)))) or m.cdf(t) == sum(
        w for x, w in m.atoms if x <= t)
