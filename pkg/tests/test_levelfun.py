from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rrlab.levelfun import Bracket, LevelFunction, function_stage, value_range
from rrlab.numerics import PiecewiseLinear, StepFunction, l2_distance

from conftest import step_functions


def pointwise(g, sys, x, f_of):
    return f_of(x)


@given(step_functions(max_den=16), st.lists(st.integers(0, 4), min_size=1, max_size=9))
def test_koopman_sum_matches_pointwise(f, raw):
    from conftest import _odo
    sys = _odo()
    coeffs = [Fraction(c, 8) for c in raw]
    g = LevelFunction.from_function(sys, 6, f)
    s = g.koopman_sum(coeffs)
    for p in range(0, 64, 5):
        x = Fraction(2 * p + 1, 128)
        expect = sum(c * f(sys.apply_power(x, i)) for i, c in enumerate(coeffs))
        lo, hi = s.value_at(x)
        assert lo <= expect <= hi


@given(step_functions(max_den=16))
def test_sq_norm_exact_for_steps(f):
    from conftest import _odo
    g = LevelFunction.from_function(_odo(), 4, f)
    assert g.sq_norm() == Bracket(l2_distance(f, StepFunction.constant(0)), l2_distance(f, StepFunction.constant(0)))
    assert g.to_step_function().equals(f)


def test_sq_norm_piecewise_linear(odo):
    f = PiecewiseLinear((0, Fraction(1, 3), 1), (Fraction(-1, 2), Fraction(1, 2), 0))
    b = LevelFunction.from_function(odo, 5, f).sq_norm()
    exact = l2_distance(f, PiecewiseLinear((0, 1), (0, 0)))
    assert b.lo <= exact <= b.hi
    assert b.hi - b.lo <= Fraction(1, 16)


def test_shift_matches_power(rigid):
    f = PiecewiseLinear((0, rigid.normalization), (0, rigid.normalization))
    g = LevelFunction.from_function(rigid, 4, f)
    h = g.shift(3)
    w = rigid.stages[4].width
    perm, _ = rigid.cells(4)
    for J in range(0, rigid.stages[4].height - 3, 17):
        x = perm[J] * w + w / 3
        lo, hi = h.value_at(x)
        assert lo == hi == f(rigid.apply_power(x, 3))
    top = rigid.stages[4].height - 1
    assert not h.defined[top]
    assert h.undefined_mass() > 0


def test_value_range_brackets_out_of_range(rigid):
    f = StepFunction((0, Fraction(1, 2)), (2, 5), rigid.normalization)
    g = LevelFunction.from_function(rigid, 3, f)
    h = g.shift(1, value_range(f))
    top = rigid.stages[3].height - 1
    assert h.defined[top] and h.value_at(perm_left(rigid, 3, top)) == (2, 5)


def perm_left(sys, m, J):
    perm, _ = sys.cells(m)
    return perm[J] * sys.stages[m].width


def test_function_stage(odo, rigid):
    f = StepFunction((0, Fraction(3, 8)), (0, 1))
    assert function_stage(odo, f) == 3
    assert function_stage(rigid) == rigid.K


def test_bracket_value():
    assert Bracket(Fraction(1), Fraction(1)).value == 1
    with pytest.raises(ValueError):
        Bracket(Fraction(0), Fraction(1)).value
