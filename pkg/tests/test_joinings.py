import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rrlab.joinings import (SHIPPED_JOININGS, JoiningError, OffDiagonalCombo, ProductMix, TwoAdicGraph,
                            apply_operator, check_attachable, disintegrate, joining_from_dict, joining_to_dict,
                            load_joining, marginal_audit)
from rrlab.levelfun import LevelFunction
from rrlab.numerics import IntervalSet, StepFunction

from conftest import rationals, step_functions

COMBO = ["shift1", "mix03", "product", "productmix"]


def attach(name, systems):
    return [s for s in systems.values() if name != "twoadic" or s.is_dyadic_odometer()]


@pytest.mark.parametrize("name", list(SHIPPED_JOININGS))
def test_round_trip(name):
    j = SHIPPED_JOININGS[name]
    assert joining_from_dict(json.loads(json.dumps(joining_to_dict(j)))) == j


@pytest.mark.parametrize("data", [
    {"type": "offdiag", "terms": [[0, "1/2"]]},
    {"type": "offdiag", "terms": [[0, "-1/2"], [1, "3/2"]]},
    {"type": "productmix", "alpha": "2", "combo": {"type": "offdiag", "terms": [[0, "1"]]}},
    {"type": "twoadic", "gamma": "1/2"},
    {"type": "nope"},
])
def test_bad_joinings(data):
    with pytest.raises((JoiningError, ValueError)):
        joining_from_dict(data)


def test_twoadic_only_on_odometer(rigid):
    with pytest.raises(JoiningError):
        check_attachable(SHIPPED_JOININGS["twoadic"], rigid)


def test_load_from_file(tmp_path):
    p = tmp_path / "j.json"
    p.write_text(json.dumps({"type": "offdiag", "terms": [[1, "1/3"], [2, "2/3"]]}))
    assert load_joining(p) == OffDiagonalCombo(((1, Fraction(1, 3)), (2, Fraction(2, 3))))


@pytest.mark.parametrize("name", list(SHIPPED_JOININGS))
@given(x=rationals(0, 1, max_den=255))
def test_fiber_is_probability(systems, name, x):
    for sys in attach(name, systems):
        f = disintegrate(SHIPPED_JOININGS[name], sys, x * sys.normalization)
        assert f.total() + f.unresolved_mass == 1


def test_identity_fiber_is_dirac(odo):
    f = disintegrate(OffDiagonalCombo(((0, 1),)), odo, Fraction(3, 7))
    assert f.atoms == ((Fraction(3, 7), 1),)


def test_twoadic_fiber(odo):
    x = Fraction(1, 4)
    f = disintegrate(TwoAdicGraph(Fraction(-1, 3)), odo, x)
    (y, w), = f.atoms
    assert w == 1 and odo.apply_power(odo.apply_power(y, 0), 0) == y


@pytest.mark.parametrize("name", list(SHIPPED_JOININGS))
def test_marginals(systems, name):
    dyadic = [IntervalSet.interval(0, Fraction(3, 8)), IntervalSet.of((Fraction(1, 8), Fraction(1, 2)))]
    probes = dyadic + [IntervalSet.interval(0, Fraction(1, 3))]
    for sys in attach(name, systems):
        rows = marginal_audit(SHIPPED_JOININGS[name], sys, probes)
        assert all(r["pass"] for r in rows)
        if sys.is_dyadic_odometer():
            assert all(r["exact"] for r in rows[:2])


@pytest.mark.parametrize("name", list(SHIPPED_JOININGS))
@given(f=step_functions(max_den=16))
def test_operator_contracts_exact_on_odometer(odo, name, f):
    j = SHIPPED_JOININGS[name]
    g = LevelFunction.from_function(odo, 4, f)
    assert g.is_exact()
    h = apply_operator(j, odo, f, 4)
    assert h.is_exact()
    lo, hi = h.integral_bracket()
    assert lo == hi == f.integral()
    assert h.sq_norm().hi <= g.sq_norm().lo
    one = apply_operator(j, odo, StepFunction.constant(1), 4)
    assert one.is_exact() and set(one.const) == {1}


@pytest.mark.parametrize("name", COMBO)
def test_operator_brackets_on_spacer_systems(rigid, chac, name):
    rng = random.Random(name)
    j = SHIPPED_JOININGS[name]
    for sys in (rigid, chac):
        L = sys.normalization
        for _ in range(5):
            cuts = sorted({Fraction(rng.randint(1, 15), 16) * L for _ in range(3)})
            f = StepFunction(tuple([Fraction(0)] + cuts), tuple(rng.randint(-3, 3) for _ in range(len(cuts) + 1)), L)
            h = apply_operator(j, sys, f, 5)
            lo, hi = h.integral_bracket()
            lo_f = lo - h.undefined_mass() * f.sup_norm()
            hi_f = hi + h.undefined_mass() * f.sup_norm()
            assert lo_f <= f.integral() / L <= hi_f


def test_pointwise_operator(odo):
    # A_σ f(x) = ∫ f dσ_x, checked at level midpoints
    j = SHIPPED_JOININGS["mix03"]
    f = StepFunction((0, Fraction(1, 4), Fraction(5, 8)), (1, 3, -2))
    h = apply_operator(j, odo, f, 4)
    for p in range(16):
        x = Fraction(2 * p + 1, 32)
        lo, hi = h.value_at(x)
        assert lo == hi == disintegrate(j, odo, x).integrate(f)


def test_product_mix_validation():
    with pytest.raises(JoiningError):
        ProductMix(Fraction(3, 2), OffDiagonalCombo(((0, 1),)))
