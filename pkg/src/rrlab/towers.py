"""Rokhlin towers R_k ⊇ R̂_k ⊇ R̃_k, the rigid rank-one conditions, and level goodness.

All set computations run on the integer model of a resolution stage ``m``:
each stage-``m`` level is a cell of width ``w_m`` and carries the stage-``k``
level it belongs to.  A base cell of ``A_k`` is IN a tower when the required
returns ``T^{±n_k}`` (and ``T^{±2n_k}``) land in ``A_k``, OUT when one
provably does not, and UNDECIDED when the return leaves the built stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .joinings import FiberMeasure, Joining, disintegrate
from .numerics import IntervalSet, Q
from .rank_one import BuiltSystem, DepthExceeded

IN, OUT, UNDECIDED = 1, 0, -1
DEFAULT_GRID = 8
DEFAULT_EPS = tuple(Fraction(1, 2 ** i) for i in range(1, 9))

ZERO = Fraction(0)


def _status(labels: list[int], n: int, wraps: bool, J: int, offsets) -> int:
    state = IN
    for off in offsets:
        t = J + off
        if 0 <= t < n:
            ok = labels[t] == 0
        elif wraps:
            ok = labels[t % n] == 0
        else:
            state = UNDECIDED
            continue
        if not ok:
            return OUT
    return state


class Tower:
    """Union of the ``n_k`` stage-k levels over the IN part of a base in ``A_k``."""

    def __init__(self, sys: BuiltSystem, k: int, m: int, status: dict[int, int]):
        self.sys, self.k, self.m = sys, k, m
        self.status = status
        self.n_in = sum(1 for s in status.values() if s == IN)
        self.n_undecided = sum(1 for s in status.values() if s == UNDECIDED)

    def _mass(self, cells: int) -> Fraction:
        return self.sys.stages[self.k].height * cells * self.sys.stages[self.m].width / self.sys.normalization

    @property
    def mass(self) -> Fraction:
        """Normalized measure of the certified part."""
        return self._mass(self.n_in)

    @property
    def mass_upper(self) -> Fraction:
        return self._mass(self.n_in + self.n_undecided)

    @property
    def undecided_mass(self) -> Fraction:
        return self._mass(self.n_undecided)

    def contains(self, x) -> bool | None:
        x = Q(x)
        w = self.sys.stages[self.m].width
        p = int(x // w)
        _, inv = self.sys.cells(self.m)
        if p >= len(inv):
            return False
        J = inv[p]
        lab = self.sys.labels(self.k, self.m)[J]
        if lab < 0:
            return False
        s = self.status[J - lab]
        return None if s == UNDECIDED else s == IN

    def _cells_where(self, state: int) -> IntervalSet:
        perm, _ = self.sys.cells(self.m)
        w = self.sys.stages[self.m].width
        n = self.sys.stages[self.k].height
        pairs = []
        for J, s in self.status.items():
            if s == state:
                pairs.extend((perm[J + i] * w, (perm[J + i] + 1) * w) for i in range(n))
        return IntervalSet.of(*pairs)

    @cached_property
    def interval_set(self) -> IntervalSet:
        return self._cells_where(IN)

    @cached_property
    def undecided_set(self) -> IntervalSet:
        return self._cells_where(UNDECIDED)


@dataclass(frozen=True)
class TowerTriple:
    k: int
    m: int
    Rk: Tower
    Rk_hat: Tower
    Rk_tilde: Tower

    @property
    def unresolved_mass(self) -> Fraction:
        return max(self.Rk_hat.undecided_mass, self.Rk_tilde.undecided_mass)


def tower_triple(sys: BuiltSystem, k: int) -> TowerTriple:
    if not 0 <= k <= sys.K:
        raise DepthExceeded(f"stage {k} not built (K={sys.K})")
    m = sys.resolution_stage(k)
    n_k, n_m = sys.stages[k].height, sys.stages[m].height
    wraps = sys.wraps_at(m)
    if not wraps and n_m < 5 * n_k:
        raise DepthExceeded(f"stage {m} too shallow for the ±2n_{k} returns")
    labels = sys.labels(k, m)
    bases = [J for J, lab in enumerate(labels) if lab == 0]
    full = Tower(sys, k, m, {J: IN for J in bases})
    hat = Tower(sys, k, m, {J: _status(labels, n_m, wraps, J, (n_k, -n_k)) for J in bases})
    tilde = Tower(sys, k, m, {J: _status(labels, n_m, wraps, J, (n_k, -n_k, 2 * n_k, -2 * n_k))
                              for J in bases})
    return TowerTriple(k, m, full, hat, tilde)


# ---------------------------------------------------------------------------
# conditions


@dataclass(frozen=True)
class ConditionReport:
    stage: int
    n_k: int
    lambda_Ak: Fraction
    cond1_mass: Fraction
    cond2_ok: bool
    cond3_ratio: Fraction
    cond3_upper: Fraction
    cond4_defect: Fraction
    max_level_diameter: Fraction
    mass_Rk: Fraction
    mass_Rk_hat: Fraction
    mass_Rk_hat_upper: Fraction
    mass_Rk_tilde: Fraction
    mass_Rk_tilde_upper: Fraction
    chain_ok: bool
    srank_ok: bool


def levels_disjoint(sys: BuiltSystem, k: int) -> bool:
    """Sort the stage-k level intervals and check they tile without overlap."""
    st = sys.stages[k]
    lefts = sorted(st.level_left(i) for i in range(st.height))
    return all(b - a >= st.width for a, b in zip(lefts, lefts[1:])) and \
        lefts[0] >= 0 and lefts[-1] + st.width <= st.ambient_length


def return_ratio(sys: BuiltSystem, k: int) -> tuple[Fraction, Fraction]:
    """Bounds on ``λ(T^{n_k}A_k ∩ A_k)/λ(A_k)``."""
    m = sys.resolution_stage(k)
    labels = sys.labels(k, m)
    n_k, n_m = sys.stages[k].height, sys.stages[m].height
    wraps = sys.wraps_at(m)
    hit = maybe = 0
    for J, lab in enumerate(labels):
        if lab == 0:
            s = _status(labels, n_m, wraps, J, (n_k,))
            hit += s == IN
            maybe += s == UNDECIDED
    scale = sys.stages[m].width / sys.stages[k].width
    return hit * scale, (hit + maybe) * scale


def verify_conditions(sys: BuiltSystem, k_range) -> list[ConditionReport]:
    reports = []
    L = sys.normalization
    for k in k_range:
        st = sys.stages[k]
        tri = tower_triple(sys, k)
        lo3, hi3 = return_ratio(sys, k)
        lam = st.width / L
        chain = all(tri.Rk_hat.status[J] >= tri.Rk_tilde.status[J] or tri.Rk_hat.status[J] == UNDECIDED
                    for J in tri.Rk.status)
        srank = tri.Rk_hat.mass >= tri.Rk.mass - 2 * st.height * (1 - hi3) * lam
        reports.append(ConditionReport(
            stage=k, n_k=st.height, lambda_Ak=lam,
            cond1_mass=st.ambient_length / L,
            cond2_ok=levels_disjoint(sys, k),
            cond3_ratio=lo3, cond3_upper=hi3,
            cond4_defect=ZERO, max_level_diameter=lam,
            mass_Rk=tri.Rk.mass,
            mass_Rk_hat=tri.Rk_hat.mass, mass_Rk_hat_upper=tri.Rk_hat.mass_upper,
            mass_Rk_tilde=tri.Rk_tilde.mass, mass_Rk_tilde_upper=tri.Rk_tilde.mass_upper,
            chain_ok=chain, srank_ok=srank,
        ))
    return reports


# ---------------------------------------------------------------------------
# inclusions


@dataclass(frozen=True)
class InclusionAudit:
    k: int
    which: str  # "hat" or "tilde"
    radius: int
    rhs_mass: Fraction
    rhs_mass_upper: Fraction
    tower_mass: Fraction
    tower_mass_upper: Fraction
    violations: Fraction  # normalized mass of certified counterexamples
    indeterminate: Fraction

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _window_states(labels: list[int], n: int, wraps: bool, radius: int) -> list[int]:
    """IN if every level within ``radius`` of J lies in R_k, OUT if one provably does not."""
    bad = [lab < 0 for lab in labels]
    if wraps:
        if not any(bad):
            return [IN] * n
        if 2 * radius + 1 > n:
            return [OUT] * n
        prev, nxt = [0] * n, [0] * n
        last = max(t for t in range(n) if bad[t]) - n
        for t in range(n):
            if bad[t]:
                last = t
            prev[t] = last
        first = min(t for t in range(n) if bad[t]) + n
        for t in range(n - 1, -1, -1):
            if bad[t]:
                first = t
            nxt[t] = first
        return [IN if J - prev[J] > radius and nxt[J] - J > radius else OUT for J in range(n)]
    prev, nxt = [0] * n, [0] * n
    last = None
    for t in range(n):
        if bad[t]:
            last = t
        prev[t] = last
    first = None
    for t in range(n - 1, -1, -1):
        if bad[t]:
            first = t
        nxt[t] = first
    out = []
    for J in range(n):
        if (prev[J] is not None and J - prev[J] <= radius) or (nxt[J] is not None and nxt[J] - J <= radius):
            out.append(OUT)
        elif J - radius < 0 or J + radius >= n:
            out.append(UNDECIDED)
        else:
            out.append(IN)
    return out


def check_inclusions(sys: BuiltSystem, k: int, closed: bool = True) -> list[InclusionAudit]:
    """Audit ``{x : T^i x ∈ R_k, |i| <= r} ⊆ R̂_k`` (r = n_k) and the R̃_k analogue (r = 2n_k).

    With ``closed=False`` the windows are ``|i| < n_k`` and ``|i| < 2n_k``.
    """
    tri = tower_triple(sys, k)
    m = tri.m
    labels = sys.labels(k, m)
    n_k, n_m = sys.stages[k].height, sys.stages[m].height
    wraps = sys.wraps_at(m)
    cell = sys.stages[m].width / sys.normalization
    audits = []
    for which, tower, mult in (("hat", tri.Rk_hat, 1), ("tilde", tri.Rk_tilde, 2)):
        radius = mult * n_k if closed else mult * n_k - 1
        states = _window_states(labels, n_m, wraps, radius)
        n_in = n_und = bad = unknown = 0
        for J, s in enumerate(states):
            if s == OUT:
                continue
            base = tower.status[J - labels[J]]
            if s == IN:
                n_in += 1
                bad += base == OUT
                unknown += base == UNDECIDED
            else:
                n_und += 1
                unknown += base != IN
        audits.append(InclusionAudit(k, which, radius, n_in * cell, (n_in + n_und) * cell,
                                     tower.mass, tower.mass_upper, bad * cell, unknown * cell))
    return audits


# ---------------------------------------------------------------------------
# fibers on the stage-k grid


def grid_points(sys: BuiltSystem, k: int, j: int, G: int = DEFAULT_GRID) -> list[Fraction]:
    st = sys.stages[k]
    left, w = st.level_left(j), st.width
    return [left + (2 * t + 1) * w / (2 * G) for t in range(G)]


def fiber_distance(a: FiberMeasure, b: FiberMeasure) -> Fraction | None:
    """KR distance of two fibers of one joining, or None when either has unresolved mass.

    The common density part cancels in ``∫|F_a - F_b|``, leaving the atoms.
    """
    if a.unresolved_mass or b.unresolved_mass:
        return None
    if a.alpha != b.alpha:
        raise ValueError("fibers of one joining share their density part")
    events = [(x, w) for x, w in a.atoms] + [(x, -w) for x, w in b.atoms]
    if not events:
        return ZERO
    dx = math.lcm(*(x.denominator for x, _ in events))
    dw = math.lcm(*(w.denominator for _, w in events))
    ints = sorted((x.numerator * (dx // x.denominator), w.numerator * (dw // w.denominator))
                  for x, w in events)
    total = diff = 0
    prev = ints[0][0]
    for x, w in ints:
        total += abs(diff) * (x - prev)
        diff += w
        prev = x
    return Fraction(total, dx * dw)


@dataclass(frozen=True)
class GoodnessStats:
    """Bounds on f_k, g_k and h_k at one point."""

    f_lo: Fraction
    f_hi: Fraction
    g: Fraction
    h_lo: Fraction
    h_hi: Fraction


def _fiber_masses(sys: BuiltSystem, k: int, fiber: FiberMeasure, predicate) -> tuple[Fraction, Fraction]:
    """Bounds on ``σ_x`` of the atoms where ``predicate`` is True (None = unknown)."""
    lo = hi = ZERO
    for y, w in fiber.atoms:
        v = predicate(y)
        if v:
            lo += w
            hi += w
        elif v is None:
            hi += w
    return lo, hi + fiber.unresolved_mass


def goodness_stats(joining: Joining, sys: BuiltSystem, k: int, x, tri: TowerTriple | None = None,
                   fiber: FiberMeasure | None = None) -> GoodnessStats:
    x = Q(x)
    tri = tri or tower_triple(sys, k)
    st = sys.stages[k]
    n_k = st.height
    L = sys.normalization
    j = sys.level_index(k, x)
    if j is None:
        raise ValueError(f"{x} is outside R_{k}")
    fiber = fiber or disintegrate(joining, sys, x)
    alpha = fiber.alpha

    def outside_tilde(y):
        v = tri.Rk_tilde.contains(y)
        return None if v is None else not v

    f_lo, f_hi = _fiber_masses(sys, k, fiber, outside_tilde)
    f_lo += alpha * (1 - tri.Rk_tilde.mass_upper)
    f_hi += alpha * (1 - tri.Rk_tilde.mass)

    # T^i x leaves level a_i only past the top of the tower, and only if the
    # first return T^{n_k - j} x misses A_k.
    if j == 0:
        returns = True
    else:
        m = tri.m
        _, inv = sys.cells(m)
        J = inv[int(x // sys.stages[m].width)]
        returns = {IN: True, OUT: False, UNDECIDED: None}[
            _status(sys.labels(k, m), sys.stages[m].height, sys.wraps_at(m), J, (n_k - j,))]
    if returns:
        h_lo = h_hi = ZERO
    else:
        def in_high_levels(y):
            lev = sys.level_index(k, y)
            return lev is not None and lev >= n_k - j

        h_lo, h_hi = _fiber_masses(sys, k, fiber, in_high_levels)
        h_lo += alpha * j * st.width / L
        h_hi += alpha * j * st.width / L
        if returns is None:
            h_lo = ZERO
    return GoodnessStats(f_lo, f_hi, ZERO, h_lo, h_hi)


@dataclass
class LevelDiagnostics:
    k: int
    eps: Fraction
    G: int
    cell: Fraction
    points: list[list[Fraction]] = field(repr=False)
    good: list[bool] = field(repr=False)
    witness: list[int | None] = field(repr=False)
    close_fraction: list[Fraction] = field(repr=False)
    in_V: list[list[bool]] = field(repr=False)
    in_G: list[list[bool]] = field(repr=False)

    @property
    def good_fraction(self) -> Fraction:
        return Fraction(sum(self.good), len(self.good))

    def witness_point(self, j: int) -> Fraction | None:
        t = self.witness[j]
        return None if t is None else self.points[j][t]

    def _members(self, j: int, mask: list[bool]) -> IntervalSet:
        half = self.cell / 2
        return IntervalSet.of(*[(p - half, p + half) for p, keep in zip(self.points[j], mask) if keep])

    def Vj_members(self, j: int) -> IntervalSet:
        """Grid cells (width ``w_k/G``) whose representative point lies in V_j."""
        return self._members(j, self.in_V[j])

    def Gj_members(self, j: int) -> IntervalSet:
        return self._members(j, self.in_G[j])


@dataclass
class LevelFibers:
    """Fibers, pairwise KR distances and f/g/h bounds on the representative grid, for every level."""

    k: int
    G: int
    points: list[list[Fraction]] = field(repr=False)
    fibers: list[list[FiberMeasure]] = field(repr=False)
    dist: list[list[list[Fraction | None]]] = field(repr=False)
    stats: list[list[GoodnessStats]] = field(repr=False)


def level_fibers(sys: BuiltSystem, k: int, joining: Joining, G: int = DEFAULT_GRID,
                 tri: TowerTriple | None = None) -> LevelFibers:
    tri = tri or tower_triple(sys, k)
    points, fibers, dists, stats = [], [], [], []
    for j in range(sys.stages[k].height):
        pts = grid_points(sys, k, j, G)
        fib = [disintegrate(joining, sys, p) for p in pts]
        dist = [[None] * G for _ in range(G)]
        for a in range(G):
            dist[a][a] = None if fib[a].unresolved_mass else ZERO
            for b in range(a + 1, G):
                dist[a][b] = dist[b][a] = fiber_distance(fib[a], fib[b])
        points.append(pts)
        fibers.append(fib)
        dists.append(dist)
        stats.append([goodness_stats(joining, sys, k, p, tri, f) for p, f in zip(pts, fib)])
    return LevelFibers(k, G, points, fibers, dists, stats)


def good_levels(sys: BuiltSystem, k: int, joining: Joining, eps, G: int = DEFAULT_GRID,
                tri: TowerTriple | None = None, cache: LevelFibers | None = None) -> LevelDiagnostics:
    """k-goodness, G_j and V_j estimated on the representative grid of every level.

    Level j is good when some grid witness has KR distance ``< eps`` to at
    least a ``1 - eps`` fraction of the grid; a grid point lies in G_j when the
    level is good and more than a ``1 - 2 eps`` fraction is within ``2 eps``.
    V_j asks ``f_k < eps``, ``g_k < eps`` and ``h_k < eps`` (upper bounds).
    Unresolved distances count as far.
    """
    eps = Q(eps)
    cache = cache or level_fibers(sys, k, joining, G, tri)
    G = cache.G
    good, witness, close, in_V, in_G = [], [], [], [], []
    for dist, stats in zip(cache.dist, cache.stats):
        counts = [sum(d is not None and d < eps for d in row) for row in dist]
        best = max(range(G), key=lambda t: (counts[t], -t))
        is_good = counts[best] >= (1 - eps) * G
        wide = [sum(d is not None and d < 2 * eps for d in row) for row in dist]
        good.append(is_good)
        witness.append(best if is_good else None)
        close.append(Fraction(counts[best], G))
        in_G.append([is_good and c > (1 - 2 * eps) * G for c in wide])
        in_V.append([s.f_hi < eps and s.g < eps and s.h_hi < eps for s in stats])
    return LevelDiagnostics(k, eps, G, sys.stages[k].width / G, cache.points, good, witness, close,
                            in_V, in_G)
