"""Exact rational sets, step functions, piecewise-linear functions and line measures.

Every object here is an immutable value built on :class:`fractions.Fraction`.
Intervals are half-open ``[a, b)``; sets are kept in canonical form (sorted,
disjoint, maximally merged) so that equality of sets is equality of values.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Fraction
Number = Union[int, Fraction]


class OutOfRange(ValueError):
    """A translated set would leave the ambient interval."""


def Q(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"not an exact rational: {value!r}")


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if not text:
        raise ValueError("empty rational")
    if "." in text or "e" in text.lower():
        raise ValueError(f"decimal notation is not exact: {text!r}")
    return Fraction(text)


def format_rational(q: Fraction) -> str:
    """Serialize as ``p/q`` (the denominator is always written)."""
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def format_decimal(q: Fraction, digits: int = 12) -> str:
    return f"{float(q):.{digits}g}"


# ---------------------------------------------------------------------------
# interval sets


def _canonical(pairs: Iterable[tuple[Fraction, Fraction]]) -> tuple:
    items = sorted((Q(a), Q(b)) for a, b in pairs)
    out: list[list[Fraction]] = []
    for a, b in items:
        if a > b:
            raise ValueError(f"reversed interval [{a}, {b})")
        if a < 0:
            raise ValueError(f"negative endpoint {a}")
        if a == b:
            continue
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of half-open rational intervals, stored canonically."""

    intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _canonical(self.intervals))

    @classmethod
    def of(cls, *pairs) -> "IntervalSet":
        return cls(tuple(pairs))

    @classmethod
    def interval(cls, a, b) -> "IntervalSet":
        return cls(((a, b),))

    @classmethod
    def _trusted(cls, pairs: tuple) -> "IntervalSet":
        obj = object.__new__(cls)
        object.__setattr__(obj, "intervals", pairs)
        return obj

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __repr__(self) -> str:
        if not self.intervals:
            return "IntervalSet(∅)"
        body = " ∪ ".join(f"[{a},{b})" for a, b in self.intervals)
        return f"IntervalSet({body})"

    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def contains(self, x) -> bool:
        x = Q(x)
        i = bisect.bisect_right(self.intervals, (x, _INF)) - 1
        return i >= 0 and self.intervals[i][0] <= x < self.intervals[i][1]

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        xs, ys = self.intervals, other.intervals
        while i < len(xs) and j < len(ys):
            a = max(xs[i][0], ys[j][0])
            b = min(xs[i][1], ys[j][1])
            if a < b:
                out.append((a, b))
            if xs[i][1] < ys[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet._trusted(tuple(out))

    def complement(self, total=1) -> "IntervalSet":
        """Complement inside ``[0, total)``."""
        total = Q(total)
        out = []
        cursor = Fraction(0)
        for a, b in self.intervals:
            if a >= total:
                break
            if a > cursor:
                out.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < total:
            out.append((cursor, total))
        return IntervalSet._trusted(tuple(out))

    def subtract(self, other: "IntervalSet") -> "IntervalSet":
        if not self.intervals:
            return self
        top = max(self.intervals[-1][1], other.intervals[-1][1] if other.intervals else 0)
        return self.intersect(other.complement(top))

    def translate(self, t, lo=0, hi=1) -> "IntervalSet":
        """Shift by ``t``; the image must stay inside ``[lo, hi)``."""
        t = Q(t)
        moved = tuple((a + t, b + t) for a, b in self.intervals)
        if moved and (moved[0][0] < Q(lo) or moved[-1][1] > Q(hi)):
            raise OutOfRange(f"{self!r} shifted by {t} leaves [{lo}, {hi})")
        return IntervalSet._trusted(moved)

    def issubset(self, other: "IntervalSet") -> bool:
        return not self.subtract(other)

    def to_strings(self) -> list[list[str]]:
        return [[format_rational(a), format_rational(b)] for a, b in self.intervals]

    @classmethod
    def from_strings(cls, pairs) -> "IntervalSet":
        return cls(tuple((parse_rational(a), parse_rational(b)) for a, b in pairs))


_INF = Fraction(10**30)

EMPTY = IntervalSet()
UNIT = IntervalSet.interval(0, 1)


def set_algebra(lhs: IntervalSet, rhs: IntervalSet | None, op: str, total=1) -> IntervalSet:
    if op == "union":
        return lhs.union(rhs)
    if op == "intersect":
        return lhs.intersect(rhs)
    if op == "subtract":
        return lhs.subtract(rhs)
    if op == "complement":
        return lhs.complement(total)
    raise ValueError(f"unknown set operation {op!r}")


def measure(s: IntervalSet) -> Fraction:
    return s.measure()


def translate(s: IntervalSet, t, lo=0, hi=1) -> IntervalSet:
    return s.translate(t, lo, hi)


# ---------------------------------------------------------------------------
# functions on [0, end)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on ``[0, end)``.

    ``breakpoints[i]`` is the left end of piece ``i``; the first breakpoint is 0.
    """

    breakpoints: tuple
    values: tuple
    end: Fraction = Fraction(1)

    def __post_init__(self):
        bps = tuple(Q(b) for b in self.breakpoints)
        vals = tuple(Q(v) for v in self.values)
        end = Q(self.end)
        if not bps or bps[0] != 0:
            raise ValueError("first breakpoint must be 0")
        if len(bps) != len(vals):
            raise ValueError("one value per piece")
        if any(b >= c for b, c in zip(bps, bps[1:])) or bps[-1] >= end:
            raise ValueError("breakpoints must increase strictly and stay below end")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "end", end)

    @classmethod
    def constant(cls, c, end=1) -> "StepFunction":
        return cls((0,), (c,), end)

    @classmethod
    def indicator(cls, s: IntervalSet, end=1) -> "StepFunction":
        end = Q(end)
        cuts = {Fraction(0)}
        for a, b in s:
            cuts.add(a)
            if b < end:
                cuts.add(b)
        bps = sorted(c for c in cuts if c < end)
        return cls(tuple(bps), tuple(1 if s.contains(b) else 0 for b in bps), end)

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple], end=1) -> "StepFunction":
        """Build from ``(left, value)`` pairs, merging equal neighbours."""
        bps, vals = [], []
        for left, v in pieces:
            if vals and vals[-1] == v:
                continue
            bps.append(left)
            vals.append(v)
        return cls(tuple(bps), tuple(vals), end)

    def __call__(self, x) -> Fraction:
        x = Q(x)
        if not 0 <= x < self.end:
            raise OutOfRange(f"{x} outside [0, {self.end})")
        return self.values[bisect.bisect_right(self.breakpoints, x) - 1]

    def pieces(self):
        """Yield ``(a, b, value)`` triples."""
        edges = self.breakpoints + (self.end,)
        for i, v in enumerate(self.values):
            yield edges[i], edges[i + 1], v

    def _combine(self, other: "StepFunction", fn) -> "StepFunction":
        if self.end != other.end:
            raise ValueError("step functions live on different intervals")
        bps = sorted(set(self.breakpoints) | set(other.breakpoints))
        return StepFunction.from_pieces([(b, fn(self(b), other(b))) for b in bps], self.end)

    def __add__(self, other):
        if isinstance(other, StepFunction):
            return self._combine(other, lambda u, v: u + v)
        return StepFunction(self.breakpoints, tuple(v + Q(other) for v in self.values), self.end)

    def __sub__(self, other):
        if isinstance(other, StepFunction):
            return self._combine(other, lambda u, v: u - v)
        return self + (-Q(other))

    def __mul__(self, c):
        c = Q(c)
        return StepFunction(self.breakpoints, tuple(v * c for v in self.values), self.end)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def integral(self) -> Fraction:
        """Lebesgue integral over ``[0, end)`` (not normalized)."""
        return sum(((b - a) * v for a, b, v in self.pieces()), Fraction(0))

    def sup_norm(self) -> Fraction:
        return max(abs(v) for v in self.values)

    def equals(self, other: "StepFunction") -> bool:
        return self.end == other.end and not any((self - other).values)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous function, linear between consecutive nodes.

    Outside ``[nodes[0], nodes[-1]]`` it is extended by constants, which keeps
    the Lipschitz constant unchanged.
    """

    nodes: tuple
    values: tuple

    def __post_init__(self):
        xs = tuple(Q(x) for x in self.nodes)
        ys = tuple(Q(y) for y in self.values)
        if len(xs) < 2 or len(xs) != len(ys):
            raise ValueError("need at least two nodes and one value per node")
        if any(a >= b for a, b in zip(xs, xs[1:])):
            raise ValueError("nodes must increase strictly")
        object.__setattr__(self, "nodes", xs)
        object.__setattr__(self, "values", ys)

    @classmethod
    def identity(cls, end=1) -> "PiecewiseLinear":
        return cls((0, end), (0, end))

    def __call__(self, x) -> Fraction:
        x = Q(x)
        xs, ys = self.nodes, self.values
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        i = bisect.bisect_right(xs, x) - 1
        return ys[i] + (ys[i + 1] - ys[i]) * (x - xs[i]) / (xs[i + 1] - xs[i])

    def slopes(self) -> list[Fraction]:
        xs, ys = self.nodes, self.values
        return [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]

    def lipschitz(self) -> Fraction:
        return max(abs(s) for s in self.slopes())

    def sup_norm(self) -> Fraction:
        return max(abs(y) for y in self.values)

    def kinks_in(self, a, b) -> list[Fraction]:
        """Nodes strictly inside ``(a, b)``."""
        lo = bisect.bisect_right(self.nodes, a)
        hi = bisect.bisect_left(self.nodes, b)
        return list(self.nodes[lo:hi])

    def range_on(self, a, b) -> tuple[Fraction, Fraction]:
        vals = [self(a), self(b)] + [self(t) for t in self.kinks_in(a, b)]
        return min(vals), max(vals)


Function = Union[StepFunction, PiecewiseLinear]


def _limits(f: Function, a: Fraction, b: Fraction) -> tuple[Fraction, Fraction]:
    """Right limit at ``a`` and left limit at ``b`` of ``f`` on a piece where it is affine."""
    if isinstance(f, StepFunction):
        v = f(a)
        return v, v
    return f(a), f(b)


def _breaks(f: Function) -> list[Fraction]:
    return list(f.breakpoints if isinstance(f, StepFunction) else f.nodes)


def affine_pieces(fs: Sequence[Function], a, b):
    """Split ``[a, b)`` so that every function in ``fs`` is affine on each piece.

    Yields ``(lo, hi, [(f(lo+), f(hi-)) for f in fs])``.
    """
    a, b = Q(a), Q(b)
    cuts = {a, b}
    for f in fs:
        cuts.update(c for c in _breaks(f) if a < c < b)
    cuts = sorted(cuts)
    for lo, hi in zip(cuts, cuts[1:]):
        yield lo, hi, [_limits(f, lo, hi) for f in fs]


def integral_on(f: Function, a, b) -> Fraction:
    """Exact ``∫_a^b f(t) dt``."""
    total = Fraction(0)
    for lo, hi, ((u, v),) in affine_pieces([f], a, b):
        total += (hi - lo) * (u + v) / 2
    return total


# ---------------------------------------------------------------------------
# measures on the line


@dataclass(frozen=True)
class LineMeasure:
    """Finite atoms plus an absolutely continuous part with a step density."""

    atoms: tuple = ()
    density: StepFunction | None = None

    def __post_init__(self):
        atoms = tuple((Q(x), Q(w)) for x, w in self.atoms if Q(w) != 0)
        if any(w < 0 for _, w in atoms):
            raise ValueError("atom weights must be non-negative")
        if self.density is not None and any(v < 0 for v in self.density.values):
            raise ValueError("density must be non-negative")
        object.__setattr__(self, "atoms", tuple(sorted(atoms)))

    @classmethod
    def dirac(cls, x) -> "LineMeasure":
        return cls(((x, 1),))

    @classmethod
    def lebesgue(cls, end=1) -> "LineMeasure":
        """Normalized Lebesgue measure on ``[0, end)``."""
        end = Q(end)
        return cls((), StepFunction.constant(1 / end, end))

    def total_mass(self) -> Fraction:
        mass = sum((w for _, w in self.atoms), Fraction(0))
        if self.density is not None:
            mass += self.density.integral()
        return mass

    def mass_of(self, s: IntervalSet) -> Fraction:
        mass = sum((w for x, w in self.atoms if s.contains(x)), Fraction(0))
        if self.density is not None:
            for a, b, v in self.density.pieces():
                if v:
                    mass += v * s.intersect(IntervalSet.interval(a, b)).measure()
        return mass

    def cdf_knots(self) -> list[Fraction]:
        knots = {x for x, _ in self.atoms}
        if self.density is not None:
            knots.update(self.density.breakpoints)
            knots.add(self.density.end)
        return sorted(knots)

    def cdf(self, t) -> Fraction:
        """``μ([-∞, t])`` (right-continuous)."""
        t = Q(t)
        mass = sum((w for x, w in self.atoms if x <= t), Fraction(0))
        if self.density is not None:
            for a, b, v in self.density.pieces():
                if t <= a:
                    break
                mass += v * (min(t, b) - a)
        return mass

    def scaled(self, c) -> "LineMeasure":
        c = Q(c)
        return LineMeasure(
            tuple((x, w * c) for x, w in self.atoms),
            None if self.density is None else self.density * c,
        )


def integrate(f: Function, m: LineMeasure) -> Fraction:
    """Exact ``∫ f dm``."""
    total = sum((w * f(x) for x, w in m.atoms), Fraction(0))
    if m.density is not None:
        for a, b, v in m.density.pieces():
            if v:
                total += v * integral_on(f, a, b)
    return total


def l2_distance(f: Function, g: Function, end=None) -> Fraction:
    """Squared L² distance ``∫ (f-g)² dλ`` for normalized Lebesgue ``λ`` on ``[0, end)``."""
    if end is None:
        end = next(h.end for h in (f, g) if isinstance(h, StepFunction)) if any(
            isinstance(h, StepFunction) for h in (f, g)) else Fraction(1)
    end = Q(end)
    total = Fraction(0)
    for lo, hi, ((f0, f1), (g0, g1)) in affine_pieces([f, g], 0, end):
        d0, d1 = f0 - g0, f1 - g1
        total += (hi - lo) * (d0 * d0 + d0 * d1 + d1 * d1) / 3
    return total / end
