"""Koopman combinations approximating A_σ, and audits of the supporting inequalities."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction

from .joinings import (Joining, TwoAdicGraph, _mean, apply_operator, check_attachable, combo_of,
                       disintegrate, two_adic_shift_mod)
from .levelfun import Bracket, LevelFunction, function_stage, value_range
from .numerics import Function, Q
from .rank_one import LEVEL_CAP, BuiltSystem
from .towers import (DEFAULT_GRID, GoodnessStats, LevelFibers, TowerTriple, good_levels, goodness_stats,
                     tower_triple)

__all__ = [
    "OutsideTower", "RangeViolation", "CoefficientProfile", "KoopmanCombination", "GoodnessStats",
    "BasePointSelection", "coefficients_at", "invariance_defect", "fiber_escape_check",
    "pointwise_bound_check", "select_base_point", "build_combination", "sot_error",
    "weak_star_error", "SquareTest", "square_tests", "approximation_stage", "certified_non_increasing",
    "AuditRow", "threshold_met",
]

ZERO = Fraction(0)
SOT_EXTRA = 4  # stages past k used for wrap-exact systems
SPACER_EXTRA = 3  # stages past k used for systems with spacers
SPACER_LEVEL_CAP = 2**17  # tallest stage materialized for those


class OutsideTower(ValueError):
    pass


class RangeViolation(ValueError):
    pass


def _verdict(lhs_hi, rhs_lo, lhs_lo, rhs_hi) -> str:
    if lhs_hi <= rhs_lo:
        return "pass"
    if lhs_lo > rhs_hi:
        return "fail"
    return "indeterminate"


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class CoefficientProfile:
    k: int
    x: Fraction
    level: int
    c: tuple
    residual: Fraction
    unresolved: Fraction


def coefficients_at(joining: Joining, sys: BuiltSystem, k: int, x) -> CoefficientProfile:
    """``c_i(x) = σ_x(T^{a_i}A_k ∩ R_k)`` with ``a_i ≡ i + j (mod n_k)``."""
    x = Q(x)
    j = sys.level_index(k, x)
    if j is None:
        raise OutsideTower(f"{x} is outside R_{k}")
    n = sys.stages[k].height
    fiber = disintegrate(joining, sys, x)
    c = [ZERO] * n
    residual = ZERO
    for y, w in fiber.atoms:
        lev = sys.level_index(k, y)
        if lev is None:
            residual += w
        else:
            c[(lev - j) % n] += w
    if fiber.alpha:
        L = sys.normalization
        each = fiber.alpha * sys.stages[k].width / L
        c = [v + each for v in c]
        residual += fiber.alpha * (L - sys.stages[k].ambient_length) / L
    return CoefficientProfile(k, x, j, tuple(c), residual, fiber.unresolved_mass)


@dataclass(frozen=True)
class KoopmanCombination:
    k: int
    coefficients: tuple
    base_point: Fraction
    selection: "BasePointSelection | None" = field(default=None, compare=False)

    @property
    def total(self) -> Fraction:
        return sum(self.coefficients, ZERO)

    def apply(self, sys: BuiltSystem, f: Function | LevelFunction, stage: int | None = None) -> LevelFunction:
        """``Σ c_i · f∘T^i`` on a stage-``stage`` level grid."""
        if stage is None:
            stage = f.m if isinstance(f, LevelFunction) else approximation_stage(sys, self.k, f)
        g = f if isinstance(f, LevelFunction) else LevelFunction.from_function(sys, stage, f)
        return g.koopman_sum(self.coefficients)

    def weights(self) -> dict[int, Fraction]:
        return {i: c for i, c in enumerate(self.coefficients) if c}


# ---------------------------------------------------------------------------
# lemma audits


@dataclass(frozen=True)
class AuditRow:
    lemma: str
    k: int
    sample: str
    lhs_lo: Fraction
    lhs_hi: Fraction
    rhs_lo: Fraction
    rhs_hi: Fraction
    verdict: str
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def invariance_defect(joining: Joining, sys: BuiltSystem, k: int, x, i: int,
                      tri: TowerTriple | None = None) -> AuditRow:
    """``Σ_j |c_j(x) - c_j(T^i x)| <= 2 σ_x(R̃_k^c)`` for ``-ℓ <= i < n_k - ℓ``."""
    x = Q(x)
    tri = tri or tower_triple(sys, k)
    st = sys.stages[k]
    ell = sys.level_index(k, x)
    if ell is None:
        raise OutsideTower(f"{x} is outside R_{k}")
    if not -ell <= i < st.height - ell:
        raise RangeViolation(f"i={i} outside [{-ell}, {st.height - ell})")
    y = x - st.level_left(ell) + st.level_left(ell + i)
    p, q = coefficients_at(joining, sys, k, x), coefficients_at(joining, sys, k, y)
    lhs = sum((abs(a - b) for a, b in zip(p.c, q.c)), ZERO)
    slack = p.unresolved + q.unresolved
    s = goodness_stats(joining, sys, k, x, tri)
    lhs_lo, lhs_hi = max(ZERO, lhs - slack), lhs + slack
    return AuditRow("other_indices", k, f"x={x};i={i}", lhs_lo, lhs_hi, 2 * s.f_lo, 2 * s.f_hi,
                    _verdict(lhs_hi, 2 * s.f_lo, lhs_lo, 2 * s.f_hi))


def fiber_escape_check(joining: Joining, sys: BuiltSystem, k: int,
                       tri: TowerTriple | None = None) -> list[AuditRow]:
    """Per level j: ``n_k ∫_{T^jA_k} σ_x(R_k^c) dλ <= λ(R̂_k^c)``.

    The left side is an upper bound (cells whose image is not resolved count
    as escaping); the right side is a lower bound.
    """
    tri = tri or tower_triple(sys, k)
    n_k = sys.stages[k].height
    L = sys.normalization
    m = tri.m
    labels = sys.labels(k, m)
    n_m = sys.stages[m].height
    wraps = sys.wraps_at(m)
    cell = sys.stages[m].width / L
    lam_k = sys.stages[k].width / L
    outside = (L - sys.stages[k].ambient_length) / L
    escape = [ZERO] * n_k
    alpha, combo = combo_of(joining)
    if combo is not None:
        for shift, p in combo.terms:
            weight = (1 - alpha) * p
            if not weight:
                continue
            counts = [0] * n_k
            for J, lab in enumerate(labels):
                if lab < 0:
                    continue
                t = J + shift
                if 0 <= t < n_m:
                    hit = labels[t] < 0
                elif wraps:
                    hit = labels[t % n_m] < 0
                else:
                    hit = True
                counts[lab] += hit
            for j in range(n_k):
                escape[j] += weight * counts[j] * cell
        # points of [L_m, L) lie outside every stage-m cell; none exist when m = K
    rhs = 1 - tri.Rk_hat.mass_upper
    rhs_hi = 1 - tri.Rk_hat.mass
    rows = []
    for j in range(n_k):
        lhs = n_k * (escape[j] + alpha * lam_k * outside)
        rows.append(AuditRow("fiber_escape", k, f"j={j}", ZERO, lhs, rhs, rhs_hi,
                             _verdict(lhs, rhs, ZERO, rhs_hi)))
    return rows


def pointwise_bound_check(joining: Joining, sys: BuiltSystem, k: int, x, f: Function, eps=None,
                          tri: TowerTriple | None = None) -> AuditRow:
    """``|A_σf(x) - Σ c_i(x) f(T^i x)|`` against the four-term bound, for ``x ∈ R̂_k``.

    With the balls taken to be the levels themselves the third term is 0.
    Index i is bad when ``T^i x`` is not in level ``a_i``; a bad index costs
    ``2‖f‖ c_i`` (the reading with ``‖f‖ σ_x(T^iA_k)`` is kept in ``note``).
    ``eps`` defaults to the raw level width.
    """
    x = Q(x)
    tri = tri or tower_triple(sys, k)
    st = sys.stages[k]
    n_k = st.height
    eps = st.width if eps is None else Q(eps)
    j = sys.level_index(k, x)
    if j is None or tri.Rk_hat.contains(x) is not True:
        raise OutsideTower(f"{x} is not certified in R̂_{k}")
    sup = f.sup_norm()
    prof = coefficients_at(joining, sys, k, x)
    exact = disintegrate(joining, sys, x).integrate(f)
    approx = ZERO
    unknown = prof.unresolved * sup
    bad, maybe = [], []
    for i in range(n_k):
        y = sys.apply_power(x, i)
        if y is None:
            maybe.append(i)
            unknown += prof.c[i] * sup
            continue
        approx += prof.c[i] * f(y)
        if sys.level_index(k, y) != (i + j) % n_k:
            bad.append(i)
    lhs = abs(exact - approx)
    lhs_lo, lhs_hi = max(ZERO, lhs - unknown), lhs + unknown
    corrected = 2 * sup * sum((prof.c[i] for i in bad), ZERO)
    literal = sup * sum((prof.c[(i - j) % n_k] for i in bad), ZERO)
    rhs_lo = eps + sup * prof.residual + corrected
    rhs_hi = rhs_lo + sup * prof.unresolved + 2 * sup * sum((prof.c[i] for i in maybe), ZERO)
    return AuditRow("A_close", k, f"x={x}", lhs_lo, lhs_hi, rhs_lo, rhs_hi,
                    _verdict(lhs_hi, rhs_lo, lhs_lo, rhs_hi), note=f"literal_fourth={literal}")


# ---------------------------------------------------------------------------
# base point and combination


@dataclass(frozen=True)
class BasePointSelection:
    k: int
    eps: Fraction
    y: Fraction
    level: int
    grid_index: int
    score: Fraction
    in_V: bool
    threshold_met: bool


def threshold_met(score: Fraction, eps: Fraction, constant: int = 13) -> bool:
    """``score >= 1 - constant·sqrt(eps)``, decided exactly."""
    gap = 1 - score
    return gap <= 0 or gap * gap <= constant * constant * eps


def select_base_point(joining: Joining, sys: BuiltSystem, k: int, eps, G: int = DEFAULT_GRID,
                      tri: TowerTriple | None = None, cache: LevelFibers | None = None) -> BasePointSelection:
    """Grid point maximizing the fraction of levels j with ``T^j y`` in ``G_j ∩ V_j`` on a good level.

    Points of one grid column share their orbit, so the score depends only on
    the column; ties go to the lowest level in V, then the lowest column.
    """
    eps = Q(eps)
    diag = good_levels(sys, k, joining, eps, G, tri, cache)
    n_k = len(diag.good)
    G = diag.G
    best = None
    for t in range(G):
        hits = sum(1 for j in range(n_k) if diag.good[j] and diag.in_G[j][t] and diag.in_V[j][t])
        score = Fraction(hits, n_k)
        ell = next((j for j in range(n_k) if diag.in_V[j][t]), None)
        key = (-score, ell is None, ell or 0, t)
        if best is None or key < best[0]:
            best = (key, score, ell, t)
    _, score, ell, t = best
    level = 0 if ell is None else ell
    return BasePointSelection(k, eps, diag.points[level][t], level, t, score, ell is not None,
                              threshold_met(score, eps))


def build_combination(joining: Joining, sys: BuiltSystem, k: int, eps, G: int = DEFAULT_GRID,
                      tri: TowerTriple | None = None, cache: LevelFibers | None = None) -> KoopmanCombination:
    sel = select_base_point(joining, sys, k, eps, G, tri, cache)
    prof = coefficients_at(joining, sys, k, sel.y)
    return KoopmanCombination(k, prof.c, sel.y, sel)


# ---------------------------------------------------------------------------
# errors


def approximation_stage(sys: BuiltSystem, k: int, f: Function | None = None) -> int:
    """Stage of the level grid used to compare ``A_σ f`` with a stage-k combination."""
    sff = sys.descriptor.spacer_free_from
    wrap = sff is not None and max(k, sff) <= sys.K
    target = min(sys.K, k + (SOT_EXTRA if wrap else SPACER_EXTRA))
    cap = LEVEL_CAP if wrap else SPACER_LEVEL_CAP
    while target > k and sys.stages[target].height > cap:
        target -= 1
    if wrap:
        return function_stage(sys, f, max(target, sff))
    return target


def sot_error(combination: KoopmanCombination, joining: Joining, sys: BuiltSystem, f: Function,
              stage: int | None = None) -> Bracket:
    """Certified bounds on ``‖A_σ f - Σ c_i f∘T^i‖²`` (normalized λ).

    Terms whose image leaves the modelled tower are bracketed by the range of
    f; on mass no stage-m level covers, the difference is bounded by the
    widest gap between ``[inf f, sup f]`` and ``Σc·[inf f, sup f]``.
    """
    m = approximation_stage(sys, combination.k, f) if stage is None else stage
    rng = value_range(f)
    g = LevelFunction.from_function(sys, m, f)
    net = _net_shifts(joining, combination)
    if net is not None:
        # shifts shared by both sides cancel before any bracketing
        alpha, _ = combo_of(joining)
        coeffs = [net.get(i, ZERO) for i in range(max(net, default=-1) + 1)]
        diff = g.koopman_sum(coeffs, rng)
        if alpha:
            diff = diff.add_constant(alpha * _mean(f, sys))
    else:
        diff = apply_operator(joining, sys, g if isinstance(joining, TwoAdicGraph) else f, m) \
            - g.koopman_sum(combination.coefficients, rng)
    b = diff.sq_norm()
    if b.unresolved:
        lo_f, hi_f = rng
        s = combination.total
        gap = max(abs(hi_f - s * lo_f), abs(s * hi_f - lo_f), abs(hi_f - s * hi_f), abs(lo_f - s * lo_f))
        return Bracket(b.lo, b.hi + b.unresolved * gap * gap, b.unresolved)
    return b


def _net_shifts(joining: Joining, combination: KoopmanCombination) -> dict[int, Fraction] | None:
    """Signed weights of ``(1-α)Σp f∘T^s - Σc f∘T^i``, or None when a shift is negative or not a combo."""
    if isinstance(joining, TwoAdicGraph):
        return None
    alpha, combo = combo_of(joining)
    net: dict[int, Fraction] = {}
    for shift, p in combo.terms:
        if shift < 0:
            return None
        net[shift] = net.get(shift, ZERO) + (1 - alpha) * p
    for i, c in combination.weights().items():
        net[i] = net.get(i, ZERO) - c
    return {i: c for i, c in net.items() if c}


@dataclass(frozen=True)
class SquareTest:
    """Bilinear interpolation of node values on a rectangular grid (clamped outside)."""

    xs: tuple
    ys: tuple
    values: tuple  # values[a][b] at (xs[a], ys[b])
    name: str = ""

    def _cell(self, nodes, t):
        return min(max(bisect.bisect_right(nodes, t) - 1, 0), len(nodes) - 2)

    def __call__(self, x, y) -> Fraction:
        x, y = Q(x), Q(y)
        x = min(max(x, self.xs[0]), self.xs[-1])
        y = min(max(y, self.ys[0]), self.ys[-1])
        a, b = self._cell(self.xs, x), self._cell(self.ys, y)
        c = self.coefficients(a, b)
        return c[0] + c[1] * x + c[2] * y + c[3] * x * y

    def coefficients(self, a: int, b: int) -> tuple:
        """``(c0, cx, cy, cxy)`` with ``F = c0 + cx·x + cy·y + cxy·x·y`` on cell (a, b)."""
        x0, x1, y0, y1 = self.xs[a], self.xs[a + 1], self.ys[b], self.ys[b + 1]
        f00, f10 = self.values[a][b], self.values[a + 1][b]
        f01, f11 = self.values[a][b + 1], self.values[a + 1][b + 1]
        hx, hy = x1 - x0, y1 - y0
        du, dv, duv = f10 - f00, f01 - f00, f11 - f10 - f01 + f00
        cxy = duv / (hx * hy)
        cx = du / hx - cxy * y0
        cy = dv / hy - cxy * x0
        c0 = f00 - du * x0 / hx - dv * y0 / hy + cxy * x0 * y0
        return c0, cx, cy, cxy

    def lipschitz(self) -> Fraction:
        """Taxicab Lipschitz constant (max absolute edge slope)."""
        best = ZERO
        for a in range(len(self.xs)):
            for b in range(len(self.ys)):
                if a + 1 < len(self.xs):
                    best = max(best, abs(self.values[a + 1][b] - self.values[a][b]) / (self.xs[a + 1] - self.xs[a]))
                if b + 1 < len(self.ys):
                    best = max(best, abs(self.values[a][b + 1] - self.values[a][b]) / (self.ys[b + 1] - self.ys[b]))
        return best

    def sup_norm(self) -> Fraction:
        return max(abs(v) for row in self.values for v in row)

    def product_integral(self) -> Fraction:
        """``∫∫ F dx dy`` over the grid rectangle."""
        total = ZERO
        for a in range(len(self.xs) - 1):
            for b in range(len(self.ys) - 1):
                area = (self.xs[a + 1] - self.xs[a]) * (self.ys[b + 1] - self.ys[b])
                total += area * (self.values[a][b] + self.values[a + 1][b]
                                 + self.values[a][b + 1] + self.values[a + 1][b + 1]) / 4
        return total


def square_tests(n: int, length=1) -> list[SquareTest]:
    """Interpolants of ``min(|y - x - s|, L/2)`` for shifts ``s = iL/n`` and of ``min(x, y)``."""
    L = Q(length)
    nodes = tuple(i * L / n for i in range(n + 1))
    half = L / 2
    tests = []
    for i in range(-(n // 2), n // 2 + 1):
        s = i * L / n
        tests.append(SquareTest(nodes, nodes, tuple(tuple(min(abs(y - x - s), half) for y in nodes) for x in nodes),
                                f"shift{i}"))
    tests.append(SquareTest(nodes, nodes, tuple(tuple(min(x, y) for y in nodes) for x in nodes), "min"))
    return tests


def _runs(weights: dict[int, Fraction]) -> list[tuple[int, int, Fraction]]:
    """Maximal runs of consecutive shifts with equal non-zero weight."""
    runs = []
    for i in sorted(weights):
        c = weights[i]
        if not c:
            continue
        if runs and runs[-1][1] == i - 1 and runs[-1][2] == c:
            runs[-1] = (runs[-1][0], i, c)
        else:
            runs.append((i, i, c))
    return runs


class _CellMoments:
    """Moments of a shift coupling on the stage-m cells, binned by test-grid cells.

    Positions are stored in half-cell units (``x = X·w/2`` with X odd) so all
    accumulation is integer arithmetic.
    """

    def __init__(self, sys: BuiltSystem, m: int, nodes: tuple):
        self.sys, self.m = sys, m
        perm, _ = sys.cells(m)
        self.n = len(perm)
        self.w = sys.stages[m].width
        self.wraps = sys.wraps_at(m)
        half = self.w / 2
        self.X = [2 * p + 1 for p in perm]
        self.bin = [min(max(bisect.bisect_right(nodes, X * half) - 1, 0), len(nodes) - 2) for X in self.X]
        self.nbins = len(nodes) - 1

    def moments(self, runs) -> list:
        """Per run: ``(weight, {(xbin, ybin): [N, ΣX, ΣY, ΣXY]}, unresolved count)``."""
        if not runs:
            return []
        n, B = self.n, self.nbins
        lo = min(0, min(r[0] for r in runs))
        hi = n + max(0, max(r[1] for r in runs))
        size = hi - lo
        # prefix tables over t in [lo, hi): per y-bin counts and sums, and an unresolved count
        cnt = [[0] * (size + 1) for _ in range(B)]
        sm = [[0] * (size + 1) for _ in range(B)]
        unres = [0] * (size + 1)
        for idx in range(size):
            t = idx + lo
            for b in range(B):
                cnt[b][idx + 1] = cnt[b][idx]
                sm[b][idx + 1] = sm[b][idx]
            unres[idx + 1] = unres[idx]
            if 0 <= t < n or self.wraps:
                u = t % n
                b = self.bin[u]
                cnt[b][idx + 1] += 1
                sm[b][idx + 1] += self.X[u]
            else:
                unres[idx + 1] += 1
        out = []
        for i0, i1, c in runs:
            acc: dict = {}
            missing = 0
            for J in range(n):
                a, z = J + i0 - lo, J + i1 + 1 - lo
                xb, X = self.bin[J], self.X[J]
                for b in range(B):
                    k = cnt[b][z] - cnt[b][a]
                    if k:
                        s = sm[b][z] - sm[b][a]
                        slot = acc.setdefault((xb, b), [0, 0, 0, 0])
                        slot[0] += k
                        slot[1] += X * k
                        slot[2] += s
                        slot[3] += X * s
                missing += unres[z] - unres[a]
            out.append((c, acc, missing))
        return out

    def integral(self, test: SquareTest, moments) -> tuple[Fraction, Fraction]:
        """``Σ_runs c · (1/L) Σ_J w Σ_i F(center_J, center_{J+i})`` and the unresolved weight."""
        half = self.w / 2
        L = self.sys.normalization
        total = ZERO
        missing = ZERO
        coeffs = {}
        for c, acc, miss in moments:
            part = ZERO
            for (xb, yb), (N, SX, SY, SXY) in acc.items():
                if (xb, yb) not in coeffs:
                    coeffs[(xb, yb)] = test.coefficients(xb, yb)
                c0, cx, cy, cxy = coeffs[(xb, yb)]
                part += c0 * N + cx * half * SX + cy * half * SY + cxy * half * half * SXY
            total += c * part
            missing += c * miss
        return total * self.w / L, missing * self.w / L


def weak_star_error(combination: KoopmanCombination, joining: Joining, sys: BuiltSystem,
                    tests: list[SquareTest], stage: int | None = None) -> Bracket:
    """Bounds on ``max_F |∫F dσ - Σ_j c_j ∫F dJ(j)|``.

    Both measures are couplings of whole stage-m cells, so each is integrated
    at cell centers; shifts common to both sides cancel before integrating and
    the remaining weight is charged ``w_m/2`` per unit for the center error.
    """
    if not tests:
        return Bracket(ZERO, ZERO)
    m = approximation_stage(sys, combination.k) if stage is None else stage
    L = sys.normalization
    net: dict[int, Fraction] = {}
    alpha = ZERO
    if isinstance(joining, TwoAdicGraph):
        check_attachable(joining, sys)
        net[two_adic_shift_mod(joining.gamma, m)] = Fraction(1)
    else:
        alpha, combo = combo_of(joining)
        for shift, p in combo.terms:
            net[shift] = net.get(shift, ZERO) + (1 - alpha) * p
    for i, c in combination.weights().items():
        net[i] = net.get(i, ZERO) - c
    runs = _runs(net)
    nodes = tests[0].xs
    if any(t.xs != nodes or t.ys != nodes for t in tests):
        raise ValueError("square tests must share one grid")
    cm = _CellMoments(sys, m, nodes)
    mom = cm.moments(runs)
    spread = sum((abs(c) for c in net.values()), ZERO) * cm.w / 2
    lo_best = hi_best = ZERO
    unresolved_total = ZERO
    for test in tests:
        value, _ = cm.integral(test, mom)
        missing = sum((abs(c) * miss for c, _, miss in mom), ZERO) * cm.w / L
        if alpha:
            value += alpha * test.product_integral() / (L * L)
        slack = spread + missing * test.sup_norm()
        lo_best = max(lo_best, abs(value) - slack)
        hi_best = max(hi_best, abs(value) + slack)
        unresolved_total = max(unresolved_total, missing)
    return Bracket(max(ZERO, lo_best), hi_best, unresolved_total)


def certified_non_increasing(combinations: list[KoopmanCombination], errors: list[Bracket]) -> bool:
    """Each step either keeps the combination (so the error is the same) or certifies ``hi_{k+1} <= lo_k``."""
    for (c0, e0), (c1, e1) in zip(zip(combinations, errors), zip(combinations[1:], errors[1:])):
        if c0.weights() == c1.weights() and e0 == e1:
            continue
        if e1.hi > e0.lo:
            return False
    return True


# ---------------------------------------------------------------------------
# batch audits


def sample_points(sys: BuiltSystem, k: int, count: int = 3) -> list[Fraction]:
    """Deterministic points spread over the levels of stage k, off the level midpoints."""
    st = sys.stages[k]
    n = st.height
    out = []
    for t in range(count):
        j = t * n // count
        out.append(st.level_left(j) + st.width * (2 * t + 1) / (2 * count + 1))
    return out


def audit_functions(sys: BuiltSystem) -> list:
    """1-Lipschitz probes on ``[0, L)``: the identity and a centered tent."""
    from .numerics import PiecewiseLinear
    L = sys.normalization
    return [PiecewiseLinear((0, L), (0, L)),
            PiecewiseLinear((0, L / 2, L), (0, L / 2, 0))]


def lemma_audit_rows(joining: Joining, sys: BuiltSystem, k: int, samples: int = 3,
                     tri: TowerTriple | None = None) -> list[AuditRow]:
    """Escape inequality on every level, plus the A-close and other-indices bounds at sampled points."""
    tri = tri or tower_triple(sys, k)
    rows = fiber_escape_check(joining, sys, k, tri)
    n_k = sys.stages[k].height
    fs = audit_functions(sys)
    for x in sample_points(sys, k, samples):
        if tri.Rk_hat.contains(x) is True:
            for f in fs:
                rows.append(pointwise_bound_check(joining, sys, k, x, f, tri=tri))
        ell = sys.level_index(k, x)
        for i in sorted({-ell, 0, 1 if ell + 1 < n_k else 0, (n_k - 1) // 2 - ell, n_k - 1 - ell}):
            rows.append(invariance_defect(joining, sys, k, x, i, tri))
    return rows
