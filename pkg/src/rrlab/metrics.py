"""Exact Kantorovich-Rubinstein distances on the line and on the square."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .numerics import LineMeasure, PiecewiseLinear, Q

ATOM_CAP = 512
EXHAUSTIVE_LIMIT = 8


class MassMismatch(ValueError):
    pass


class SizeExceeded(ValueError):
    pass


# ---------------------------------------------------------------------------
# the line


def _abs_integral(d0: Fraction, d1: Fraction, length: Fraction) -> Fraction:
    """``∫ |D|`` over a segment where ``D`` runs linearly from ``d0`` to ``d1``."""
    if (d0 >= 0) == (d1 >= 0) or d0 == 0 or d1 == 0:
        return abs(d0 + d1) * length / 2
    return (d0 * d0 + d1 * d1) * length / (2 * abs(d0 - d1))


def _density_at(m: LineMeasure, t: Fraction) -> Fraction:
    d = m.density
    if d is None or t >= d.end:
        return Fraction(0)
    return d(t)


def kr_line(mu: LineMeasure, nu: LineMeasure) -> Fraction:
    """Exact W1 distance as ``∫ |F_μ - F_ν|``."""
    if mu.total_mass() != nu.total_mass():
        raise MassMismatch(f"masses {mu.total_mass()} and {nu.total_mass()} differ")
    knots = sorted(set(mu.cdf_knots()) | set(nu.cdf_knots()))
    jumps: dict[Fraction, Fraction] = {}
    for x, w in mu.atoms:
        jumps[x] = jumps.get(x, Fraction(0)) + w
    for x, w in nu.atoms:
        jumps[x] = jumps.get(x, Fraction(0)) - w
    total = Fraction(0)
    diff = Fraction(0)
    for a, b in zip(knots, knots[1:]):
        diff += jumps.get(a, 0)
        slope = _density_at(mu, a) - _density_at(nu, a)
        end = diff + slope * (b - a)
        total += _abs_integral(diff, end, b - a)
        diff = end
    return total


# ---------------------------------------------------------------------------
# the square


@dataclass(frozen=True)
class PlaneAtomicMeasure:
    atoms: tuple  # (((x, y), w), ...)

    def __post_init__(self):
        merged: dict[tuple, Fraction] = {}
        for (x, y), w in self.atoms:
            w = Q(w)
            if w < 0:
                raise ValueError("atom weights must be non-negative")
            if w:
                key = (Q(x), Q(y))
                merged[key] = merged.get(key, Fraction(0)) + w
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))

    def total_mass(self) -> Fraction:
        return sum((w for _, w in self.atoms), Fraction(0))


def taxicab(p, q) -> Fraction:
    return abs(p[0] - q[0]) + abs(p[1] - q[1])


def _prepare(mu: PlaneAtomicMeasure, nu: PlaneAtomicMeasure):
    if mu.total_mass() != nu.total_mass():
        raise MassMismatch(f"masses {mu.total_mass()} and {nu.total_mass()} differ")
    src = [p for p, _ in mu.atoms]
    dst = [q for q, _ in nu.atoms]
    cost = [[taxicab(p, q) for q in dst] for p in src]
    return [w for _, w in mu.atoms], [w for _, w in nu.atoms], cost


def _tree_flow(cells, supply, demand):
    """Solve a transportation basis by peeling leaves; None if it is not a spanning tree."""
    n, m = len(supply), len(demand)
    rows = [set() for _ in range(n)]
    cols = [set() for _ in range(m)]
    for i, j in cells:
        rows[i].add(j)
        cols[j].add(i)
    rs, cs = list(supply), list(demand)
    flow = {}
    left = set(cells)
    while left:
        for i in range(n):
            if len(rows[i]) == 1:
                (j,) = rows[i]
                amount = rs[i]
                break
        else:
            for j in range(m):
                if len(cols[j]) == 1:
                    (i,) = cols[j]
                    amount = cs[j]
                    break
            else:
                return None
        if amount < 0:
            return None
        flow[(i, j)] = amount
        rs[i] -= amount
        cs[j] -= amount
        rows[i].discard(j)
        cols[j].discard(i)
        left.discard((i, j))
    if any(rs) or any(cs):
        return None
    return flow


def kr_square_exhaustive(mu: PlaneAtomicMeasure, nu: PlaneAtomicMeasure) -> Fraction:
    """Enumerate every basic feasible transport plan (small inputs only)."""
    supply, demand, cost = _prepare(mu, nu)
    n, m = len(supply), len(demand)
    if n + m > EXHAUSTIVE_LIMIT:
        raise SizeExceeded(f"{n + m} atoms exceed the exhaustive limit {EXHAUSTIVE_LIMIT}")
    if not n:
        return Fraction(0)
    grid = [(i, j) for i in range(n) for j in range(m)]
    best = None
    for cells in itertools.combinations(grid, n + m - 1):
        flow = _tree_flow(cells, supply, demand)
        if flow is None:
            continue
        c = sum(f * cost[i][j] for (i, j), f in flow.items())
        if best is None or c < best:
            best = c
    return best


def _ssp(supply: list[int], demand: list[int], cost: list[list[int]]) -> int:
    """Min-cost transportation by successive shortest paths (integer data)."""
    n, m = len(supply), len(demand)
    INF = math.inf
    flow = [[0] * m for _ in range(n)]
    ps, pd = [0] * n, [0] * m
    rs, rd = list(supply), list(demand)
    while any(rs):
        ds, dd = [INF] * n, [INF] * m
        via_s, via_d = [-1] * n, [-1] * m
        done_s, done_d = [False] * n, [False] * m
        for i in range(n):
            if rs[i]:
                ds[i] = 0
        while True:
            best, kind, node = INF, None, -1
            for i in range(n):
                if not done_s[i] and ds[i] < best:
                    best, kind, node = ds[i], "s", i
            for j in range(m):
                if not done_d[j] and dd[j] < best:
                    best, kind, node = dd[j], "d", j
            if kind is None:
                break
            if kind == "s":
                done_s[node] = True
                row, base = cost[node], best + ps[node]
                for j in range(m):
                    nd = base + row[j] - pd[j]
                    if nd < dd[j]:
                        dd[j], via_d[j] = nd, node
            else:
                done_d[node] = True
                base = best + pd[node]
                for i in range(n):
                    if flow[i][node]:
                        nd = base - cost[i][node] - ps[i]
                        if nd < ds[i]:
                            ds[i], via_s[i] = nd, node
        target = min((j for j in range(m) if rd[j]), key=lambda j: (dd[j], j))
        cap = dd[target]
        for i in range(n):
            ps[i] += min(ds[i], cap)
        for j in range(m):
            pd[j] += min(dd[j], cap)
        amount = rd[target]
        j = target
        path = []
        while True:
            i = via_d[j]
            path.append((i, j))
            if ds[i] == 0 and rs[i] and via_s[i] == -1:
                amount = min(amount, rs[i])
                break
            j = via_s[i]
            amount = min(amount, flow[i][j])
        j = target
        for i, j in path:
            flow[i][j] += amount
        for (i, _), (_, j2) in zip(path, path[1:]):
            flow[i][j2] -= amount
        rs[path[-1][0]] -= amount
        rd[target] -= amount
    return sum(flow[i][j] * cost[i][j] for i in range(n) for j in range(m))


def kr_square(mu: PlaneAtomicMeasure, nu: PlaneAtomicMeasure, cap: int = ATOM_CAP) -> Fraction:
    """Exact W1 on the square under the taxicab ground metric."""
    supply, demand, cost = _prepare(mu, nu)
    n, m = len(supply), len(demand)
    if max(n, m) > cap:
        raise SizeExceeded(f"{max(n, m)} atoms exceed the cap {cap}")
    if not n:
        return Fraction(0)
    wscale = math.lcm(*(w.denominator for w in supply + demand))
    cscale = math.lcm(*(c.denominator for row in cost for c in row))
    total = _ssp([int(w * wscale) for w in supply], [int(w * wscale) for w in demand],
                 [[int(c * cscale) for c in row] for row in cost])
    return Fraction(total, wscale * cscale)


# ---------------------------------------------------------------------------
# test families


def lipschitz_family(n: int) -> list[PiecewiseLinear]:
    """Centered identity, hats of height ``1/n`` at ``i/n``, and capped distances to ``i/n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    h = Fraction(1, n)
    half = Fraction(1, 2)
    family = [PiecewiseLinear((0, 1), (-half, half))]
    for i in range(n + 1):
        c = i * h
        xs = [t for t in (c - h, c, c + h) if 0 <= t <= 1]
        if len(xs) == 1:
            xs = [c - h, c, c + h]
        family.append(PiecewiseLinear(tuple(xs), tuple(max(Fraction(0), h - abs(t - c)) for t in xs)))
    for i in range(n + 1):
        c = i * h
        xs = sorted({Fraction(0), Fraction(1), c} | {t for t in (c - half, c + half) if 0 < t < 1})
        family.append(PiecewiseLinear(tuple(xs), tuple(min(abs(t - c), half) for t in xs)))
    return family
