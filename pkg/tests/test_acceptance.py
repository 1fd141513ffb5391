"""Acceptance criteria 1-10; each prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the summary)
or directly with ``python tests/test_acceptance.py``.
"""

import functools
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from rrlab.approximation import (build_combination, certified_non_increasing, coefficients_at,
                                 lemma_audit_rows, sot_error, square_tests, weak_star_error)
from rrlab.cli import main as cli_main
from rrlab.joinings import SHIPPED_JOININGS, apply_operator, product
from rrlab.levelfun import LevelFunction
from rrlab.metrics import PlaneAtomicMeasure, kr_line, kr_square, kr_square_exhaustive
from rrlab.numerics import LineMeasure, PiecewiseLinear, StepFunction
from rrlab.rank_one import build, chacon, odometer, rigid_spacered
from rrlab.towers import return_ratio, tower_triple, verify_conditions
from rrlab.twoadic import two_adic_add, two_adic_shift_mod

RESULTS: dict[int, tuple[bool, str]] = {}


def criterion(n, text):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                RESULTS[n] = (False, text)
                raise
            RESULTS[n] = (True, text)
        run.criterion = n
        return run
    return wrap


def report_lines():
    return [f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}" for n, (ok, text) in sorted(RESULTS.items())]


@functools.lru_cache(maxsize=None)
def _sys(name):
    return build({"odometer": lambda: odometer(16), "rigid": rigid_spacered, "chacon": chacon}[name]())


def _step_suite(rng, count, den=16, L=1):
    out = []
    for _ in range(count):
        cuts = sorted({Fraction(rng.randint(1, den - 1), den) * L for _ in range(rng.randint(0, 5))})
        vals = tuple(Fraction(rng.randint(-8, 8), 4) for _ in range(len(cuts) + 1))
        out.append(StepFunction(tuple([Fraction(0)] + cuts), vals, L))
    return out


@criterion(1, "odometer towers have full mass and cond3 = 1, k = 1..10")
def test_criterion_1_odometer_exact():
    t0 = time.perf_counter()
    odo = build(odometer(12))
    for k in range(1, 11):
        tri = tower_triple(odo, k)
        assert tri.Rk.mass == tri.Rk_hat.mass == tri.Rk_tilde.mass == 1
    assert all(r.cond3_ratio == 1 for r in verify_conditions(odo, range(1, 11)))
    assert time.perf_counter() - t0 < 5


@criterion(2, "rigid-spacered cond3 = (r-1)/r, cond1 increasing, cond4 = 0, k = 1..6")
def test_criterion_2_rigid_trend():
    reports = verify_conditions(_sys("rigid"), range(1, 7))
    for r in reports:
        rk = r.stage + 2
        assert r.cond3_ratio == r.cond3_upper == Fraction(rk - 1, rk)
        assert r.cond4_defect == 0
    masses = [r.cond1_mass for r in reports]
    assert all(a < b for a, b in zip(masses, masses[1:])) and masses[-1] < 1


def _chacon_oracle(sys, k):
    # T^{n_k} applied pointwise to every stage-K cell of A_k
    K = sys.K
    w = sys.stages[K].width
    perm, _ = sys.cells(K)
    n_k = sys.stages[k].height
    hit = unknown = total = 0
    for J, lab in enumerate(sys.labels(k, K)):
        if lab != 0:
            continue
        total += 1
        y = sys.apply_power(perm[J] * w + w / 2, n_k)
        if y is None:
            unknown += 1
        elif sys.level_index(k, y) == 0:
            hit += 1
    return Fraction(hit, total), Fraction(hit + unknown, total)


@criterion(3, "chacon cond3 <= 3/4 for k = 1..6, checked against a pointwise oracle")
def test_criterion_3_chacon_control():
    chac = _sys("chacon")
    for k in range(1, 7):
        lo, hi = return_ratio(chac, k)
        assert (lo, hi) == _chacon_oracle(chac, k)
        assert hi <= Fraction(3, 4)


@criterion(4, "1/2 J(0) + 1/2 J(3): c_0 = c_3 = 1/2 and zero SOT error on refinable steps")
def test_criterion_4_exact_reconstruction():
    odo = _sys("odometer")
    j = SHIPPED_JOININGS["mix03"]
    rng = random.Random(4)
    for k in range(2, 9):
        comb = build_combination(j, odo, k, Fraction(1, 8))
        assert comb.weights() == {0: Fraction(1, 2), 3: Fraction(1, 2)}
        for f in _step_suite(rng, 5, den=2 ** k):
            b = sot_error(comb, j, odo, f)
            assert b.exact and b.value == 0


@criterion(5, "product joining with f(x) = x: SOT error <= 4^-k, k = 1..10")
def test_criterion_5_product_rate():
    t0 = time.perf_counter()
    odo = _sys("odometer")
    f = PiecewiseLinear((0, 1), (0, 1))
    for k in range(1, 11):
        comb = build_combination(product(), odo, k, Fraction(1, 8))
        assert sot_error(comb, product(), odo, f).hi <= Fraction(1, 4 ** k)
    assert time.perf_counter() - t0 < 30


def _digit_shift(odo, gamma, k):
    # stage-k level of S_γ(0), with S_γ computed by digit-wise 2-adic addition
    y = two_adic_add(Fraction(0), gamma)
    return odo.level_index(k, y)


@criterion(6, "2-adic graph: c_{m_k} >= 1 - 2^-(k-2) and weak-star error non-increasing, k = 3..8")
def test_criterion_6_twoadic():
    odo = _sys("odometer")
    j = SHIPPED_JOININGS["twoadic"]
    tests = square_tests(4)
    combos, errors = [], []
    for k in range(3, 9):
        m_k = two_adic_shift_mod(j.gamma, k)
        assert 3 * m_k % 2 ** k == 2 ** k - 1
        assert m_k == _digit_shift(odo, j.gamma, k)
        comb = build_combination(j, odo, k, Fraction(1, 8))
        assert comb.coefficients[m_k] >= 1 - Fraction(1, 2 ** (k - 2))
        combos.append(comb)
        errors.append(weak_star_error(comb, j, odo, tests, stage=16))
    assert certified_non_increasing(combos, errors)


@criterion(7, "lemma audits: zero violations over 3 systems x 4 joinings (plus 2-adic), k = 1..6")
def test_criterion_7_lemma_audits():
    t0 = time.perf_counter()
    bad = []
    for name in ("odometer", "rigid", "chacon"):
        sys_ = _sys(name)
        joinings = ["shift1", "mix03", "productmix", "product"] + (["twoadic"] if name == "odometer" else [])
        for jn in joinings:
            for k in range(1, 7):
                rows = lemma_audit_rows(SHIPPED_JOININGS[jn], sys_, k)
                bad += [(name, jn, r) for r in rows if r.verdict != "pass"]
    assert not bad, bad[:3]
    assert time.perf_counter() - t0 < 120


@criterion(8, "kr_line and kr_square agree with closed forms and the exhaustive solver")
def test_criterion_8_metrics():
    rng = random.Random(8)
    r = lambda: Fraction(rng.randint(0, 1000), rng.randint(1, 1000))
    for _ in range(100):
        a, b = r(), r()
        assert kr_line(LineMeasure.dirac(a), LineMeasure.dirac(b)) == abs(a - b)
    assert kr_line(LineMeasure.lebesgue(), LineMeasure.dirac(Fraction(1, 2))) == Fraction(1, 4)

    def prob():
        pts = [(r(), rng.randint(1, 5)) for _ in range(rng.randint(1, 5))]
        tot = sum(w for _, w in pts)
        return LineMeasure(tuple((x, Fraction(w, tot)) for x, w in pts))

    for _ in range(100):
        p, q, s = prob(), prob(), prob()
        assert kr_line(p, s) <= kr_line(p, q) + kr_line(q, s)

    def plane(n):
        pts = [((Fraction(rng.randint(0, 8), 8), Fraction(rng.randint(0, 8), 8)), rng.randint(1, 4))
               for _ in range(n)]
        tot = sum(w for _, w in pts)
        return PlaneAtomicMeasure(tuple((p, Fraction(w, tot)) for p, w in pts))

    for _ in range(50):
        mu, nu = plane(rng.randint(1, 4)), plane(rng.randint(1, 4))
        assert kr_square(mu, nu) == kr_square_exhaustive(mu, nu)


@criterion(9, "A1 = 1, integral preserved, L2 contraction on 50 random steps, every joining")
def test_criterion_9_operator_contracts():
    odo = _sys("odometer")
    suite = _step_suite(random.Random(9), 50)
    for name, j in SHIPPED_JOININGS.items():
        one = apply_operator(j, odo, StepFunction.constant(1), 4)
        assert one.is_exact() and set(one.const) == {1}
        for f in suite:
            g = LevelFunction.from_function(odo, 4, f)
            h = apply_operator(j, odo, f, 4)
            assert h.is_exact()
            lo, hi = h.integral_bracket()
            assert lo == hi == f.integral()
            assert h.sq_norm().hi <= g.sq_norm().lo


@criterion(10, "two identical approx runs write byte-identical files")
def test_criterion_10_determinism(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli_main(["approx", "--system", "chacon", "--joining", "productmix",
                         "--k-max", "3", "--out", str(out)]) == 0
        outs.append(out)
    for name in ("sweep.csv", "combination.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


if __name__ == "__main__":
    import inspect
    import tempfile
    failed = False
    for fn in sorted((f for f in list(globals().values()) if hasattr(f, "criterion")), key=lambda f: f.criterion):
        try:
            if "tmp_path" in inspect.signature(fn).parameters:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except Exception:
            failed = True
    print("\n".join(report_lines()))
    sys.exit(1 if failed else 0)
