import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rrlab.metrics import (MassMismatch, PlaneAtomicMeasure, SizeExceeded, kr_line, kr_square,
                           kr_square_exhaustive, lipschitz_family)
from rrlab.numerics import LineMeasure, integrate

from conftest import rationals


def probability(draw_points):
    return st.lists(st.tuples(rationals(), st.integers(1, 6)), min_size=1, max_size=5).map(
        lambda ps: LineMeasure(tuple((x, Fraction(w, sum(v for _, v in ps))) for x, w in ps)))


@given(rationals(), rationals())
def test_dirac_distance(a, b):
    assert kr_line(LineMeasure.dirac(a), LineMeasure.dirac(b)) == abs(a - b)


def test_lebesgue_to_midpoint():
    assert kr_line(LineMeasure.lebesgue(), LineMeasure.dirac(Fraction(1, 2))) == Fraction(1, 4)


@given(probability(None), probability(None), probability(None))
def test_triangle_and_symmetry(a, b, c):
    ab, bc, ac = kr_line(a, b), kr_line(b, c), kr_line(a, c)
    assert ac <= ab + bc
    assert ab == kr_line(b, a)
    assert kr_line(a, a) == 0


@given(probability(None), probability(None))
def test_dual_lower_bound(a, b):
    # every 1-Lipschitz test gives a lower bound
    d = kr_line(a, b)
    for f in lipschitz_family(4):
        assert abs(integrate(f, a) - integrate(f, b)) <= d


def test_unequal_mass_rejected():
    with pytest.raises(MassMismatch):
        kr_line(LineMeasure.dirac(0), LineMeasure(((0, 2),)))


def plane(rng, n):
    pts = [((Fraction(rng.randint(0, 8), 8), Fraction(rng.randint(0, 8), 8)), rng.randint(1, 4)) for _ in range(n)]
    total = sum(w for _, w in pts)
    return PlaneAtomicMeasure(tuple((p, Fraction(w, total)) for p, w in pts))


def test_square_two_point_example():
    mu = PlaneAtomicMeasure((((0, 0), Fraction(1, 2)), ((1, 1), Fraction(1, 2))))
    nu = PlaneAtomicMeasure((((1, 0), Fraction(1, 2)), ((0, 1), Fraction(1, 2))))
    assert kr_square(mu, nu) == 1


@pytest.mark.parametrize("seed", range(40))
def test_square_matches_exhaustive(seed):
    rng = random.Random(seed)
    mu, nu = plane(rng, rng.randint(1, 4)), plane(rng, rng.randint(1, 4))
    assert kr_square(mu, nu) == kr_square_exhaustive(mu, nu)


def test_exhaustive_size_limit():
    rng = random.Random(0)
    with pytest.raises(SizeExceeded):
        kr_square_exhaustive(plane(rng, 5), plane(rng, 5))


def test_family_is_one_lipschitz():
    fam = lipschitz_family(4)
    assert len(fam) == 11
    assert all(f.lipschitz() <= 1 for f in fam)
    assert fam[3](Fraction(1, 2)) == Fraction(1, 4)
