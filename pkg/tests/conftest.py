import sys
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from rrlab.rank_one import build, chacon, odometer, rigid_spacered

settings.register_profile("rrlab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rrlab")


@pytest.fixture(scope="session")
def odo():
    return build(odometer(14))


@pytest.fixture(scope="session")
def rigid():
    return build(rigid_spacered())


@pytest.fixture(scope="session")
def chac():
    return build(chacon())


@pytest.fixture(scope="session")
def systems(odo, rigid, chac):
    return {"odometer": odo, "rigid-spacered": rigid, "chacon": chac}


def rationals(lo=0, hi=1, max_den=64):
    """Rationals in ``[lo, hi)`` with bounded denominators."""
    return st.builds(lambda d, t: Fraction(lo) + (Fraction(hi) - Fraction(lo)) * Fraction(t % d, d),
                     st.integers(1, max_den), st.integers(0, 10**6))


def interval_sets(max_den=32, max_parts=4):
    from rrlab.numerics import IntervalSet
    return st.lists(st.tuples(st.integers(0, max_den), st.integers(0, max_den)), max_size=max_parts).map(
        lambda ps: IntervalSet.of(*[(Fraction(min(a, b), max_den), Fraction(max(a, b), max_den))
                                    for a, b in ps if a != b]))


def step_functions(max_den=16, max_pieces=5, end=1):
    from rrlab.numerics import StepFunction
    end = Fraction(end)

    def make(cuts, vals):
        bps = sorted({Fraction(0)} | {end * Fraction(c, max_den) for c in cuts if 0 < c < max_den})
        vs = (vals * len(bps))[:len(bps)]
        return StepFunction(tuple(bps), tuple(Fraction(v, 4) for v in vs), end)

    return st.builds(make, st.lists(st.integers(1, max_den - 1), max_size=max_pieces),
                     st.lists(st.integers(-8, 8), min_size=1, max_size=max_pieces + 1))


_ODO_CACHE = []


def _odo():
    """Module-level odometer for hypothesis tests that cannot take fixtures."""
    if not _ODO_CACHE:
        _ODO_CACHE.append(build(odometer(14)))
    return _ODO_CACHE[0]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.report_lines():
            terminalreporter.write_line(line)
