"""Functions sampled on the level grid of one tower stage.

On stage-``m`` level ``J`` a :class:`LevelFunction` is known to lie in
``const[J] + slope[J]*u + [lo[J], hi[J]]`` where ``u`` is the offset inside the
level.  Translating a level onto another keeps this form exactly; a wrap
through the top of a spacer-free tower (whose within-level position is not
known at stage ``m``) collapses it to a constant bracket.  Levels with no
information at all are marked undefined and reported as certified mass.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate

from .numerics import Function, PiecewiseLinear, Q, StepFunction
from .rank_one import LEVEL_CAP, BuiltSystem

ZERO = Fraction(0)


@dataclass(frozen=True)
class Bracket:
    """Certified enclosure ``lo <= value <= hi`` plus the normalized mass left unresolved."""

    lo: Fraction
    hi: Fraction
    unresolved: Fraction = ZERO

    @property
    def exact(self) -> bool:
        return self.lo == self.hi and self.unresolved == 0

    @property
    def value(self) -> Fraction:
        if not self.exact:
            raise ValueError(f"not an exact value: {self}")
        return self.lo


def function_stage(sys: BuiltSystem, f: Function | None = None, minimum: int = 0) -> int:
    """Coarsest usable stage ``>= minimum`` on which ``f``'s breakpoints are level endpoints."""
    sff = sys.descriptor.spacer_free_from
    if sff is None or max(minimum, sff) > sys.K:
        return sys.resolution_stage(sys.K)
    m = max(minimum, sff)
    if f is None:
        return m
    cuts = f.breakpoints if isinstance(f, StepFunction) else f.nodes
    cuts = [c for c in cuts if 0 < c < sys.normalization]
    while m < sys.K and sys.stages[m + 1].height <= LEVEL_CAP:
        w = sys.stages[m].width
        if all((c / w).denominator == 1 for c in cuts):
            break
        m += 1
    return m


class LevelFunction:
    def __init__(self, sys: BuiltSystem, m: int, const, slope, lo, hi, defined):
        self.sys = sys
        self.m = m
        self.const = const
        self.slope = slope
        self.lo = lo
        self.hi = hi
        self.defined = defined
        self._brackets = None

    @property
    def n(self) -> int:
        return len(self.const)

    @property
    def width(self) -> Fraction:
        return self.sys.stages[self.m].width

    def __repr__(self) -> str:
        return f"LevelFunction(stage={self.m}, levels={self.n})"

    # -- construction --------------------------------------------------------

    @classmethod
    def from_function(cls, sys: BuiltSystem, m: int, f: Function) -> "LevelFunction":
        cells, _ = sys.cells(m)
        w = sys.stages[m].width
        n = len(cells)
        const, slope, lo, hi = [ZERO] * n, [ZERO] * n, [ZERO] * n, [ZERO] * n
        if isinstance(f, StepFunction):
            bps, vals = f.breakpoints, f.values
            for J, p in enumerate(cells):
                a = p * w
                i = bisect.bisect_right(bps, a) - 1
                j = bisect.bisect_left(bps, a + w)
                if j - i == 1:
                    const[J] = vals[i]
                else:
                    inside = vals[i:j]
                    const[J] = min(inside)
                    hi[J] = max(inside) - const[J]
        elif isinstance(f, PiecewiseLinear):
            for J, p in enumerate(cells):
                a = p * w
                if f.kinks_in(a, a + w):
                    mn, mx = f.range_on(a, a + w)
                    const[J], hi[J] = mn, mx - mn
                else:
                    fa = f(a)
                    const[J], slope[J] = fa, (f(a + w) - fa) / w
        else:
            raise TypeError(f"cannot sample {type(f).__name__}")
        return cls(sys, m, const, slope, lo, hi, [True] * n)

    @classmethod
    def constant(cls, sys: BuiltSystem, m: int, c) -> "LevelFunction":
        n = sys.stages[m].height
        c = Q(c)
        return cls(sys, m, [c] * n, [ZERO] * n, [ZERO] * n, [ZERO] * n, [True] * n)

    def _like(self, const, slope, lo, hi, defined) -> "LevelFunction":
        return LevelFunction(self.sys, self.m, const, slope, lo, hi, defined)

    # -- brackets ------------------------------------------------------------

    def brackets(self) -> tuple[list[Fraction], list[Fraction]]:
        """Per level, ``(min, max - min)`` of the enclosure over the whole level."""
        if self._brackets is None:
            w = self.width
            base, spread = [], []
            for c, s, lo, hi in zip(self.const, self.slope, self.lo, self.hi):
                drop = s * w if s < 0 else ZERO
                base.append(c + lo + drop)
                spread.append(abs(s) * w + hi - lo)
            self._brackets = (base, spread)
        return self._brackets

    # -- Koopman powers --------------------------------------------------------

    def shift(self, i: int, value_range=None) -> "LevelFunction":
        """``f ∘ T^i``; images past the top are bracketed by ``value_range`` if given, else undefined."""
        if i == 0:
            return self
        n = self.n
        wraps = self.sys.wraps_at(self.m)
        base, spread = self.brackets()
        const, slope, lo, hi, defined = [], [], [], [], []
        for J in range(n):
            t = J + i
            if 0 <= t < n:
                const.append(self.const[t]); slope.append(self.slope[t])
                lo.append(self.lo[t]); hi.append(self.hi[t]); defined.append(self.defined[t])
            elif wraps:
                t %= n
                const.append(base[t]); slope.append(ZERO)
                lo.append(ZERO); hi.append(spread[t]); defined.append(self.defined[t])
            elif value_range is not None:
                const.append(value_range[0]); slope.append(ZERO)
                lo.append(ZERO); hi.append(value_range[1] - value_range[0]); defined.append(True)
            else:
                const.append(ZERO); slope.append(ZERO)
                lo.append(ZERO); hi.append(ZERO); defined.append(False)
        return self._like(const, slope, lo, hi, defined)

    def cyclic_relabel(self, s: int) -> "LevelFunction":
        """Value on level J taken from level ``(J + s) mod n`` at an unknown offset."""
        n = self.n
        base, spread = self.brackets()
        idx = [(J + s) % n for J in range(n)]
        return self._like([base[t] for t in idx], [ZERO] * n, [ZERO] * n,
                          [spread[t] for t in idx], [self.defined[t] for t in idx])

    def koopman_sum(self, coeffs, value_range=None) -> "LevelFunction":
        """``Σ_i coeffs[i] · f∘T^i`` for ``i = 0 .. len(coeffs)-1``, via prefix sums.

        Terms past the top of the tower are bracketed by ``value_range`` when
        it is given; otherwise they leave the level undefined.
        """
        n = self.n
        size = len(coeffs)
        if size > n + 1:
            raise ValueError("more coefficients than levels at this stage")
        wraps = self.sys.wraps_at(self.m)
        base, spread = self.brackets()
        ext = n + max(size - 1, 0)
        ec, es, el, eh, eu = [], [], [], [], []
        for t in range(ext):
            if t < n:
                ec.append(self.const[t]); es.append(self.slope[t])
                el.append(self.lo[t]); eh.append(self.hi[t]); eu.append(0 if self.defined[t] else 1)
            elif wraps:
                u = t - n
                ec.append(base[u]); es.append(ZERO); el.append(ZERO); eh.append(spread[u])
                eu.append(0 if self.defined[u] else 1)
            elif value_range is not None:
                ec.append(value_range[0]); es.append(ZERO); el.append(ZERO)
                eh.append(value_range[1] - value_range[0]); eu.append(0)
            else:
                ec.append(ZERO); es.append(ZERO); el.append(ZERO); eh.append(ZERO); eu.append(1)
        pc, ps, pl, ph = ([ZERO] + list(accumulate(a)) for a in (ec, es, el, eh))
        pu = [0] + list(accumulate(eu))

        runs = []
        i = 0
        while i < size:
            c = Q(coeffs[i])
            j = i
            while j + 1 < size and coeffs[j + 1] == c:
                j += 1
            if c:
                runs.append((i, j, c))
            i = j + 1

        const, slope, lo, hi = [ZERO] * n, [ZERO] * n, [ZERO] * n, [ZERO] * n
        defined = [True] * n
        for i0, i1, c in runs:
            for J in range(n):
                a, b = J + i0, J + i1 + 1
                if pu[b] - pu[a]:
                    defined[J] = False
                    continue
                const[J] += c * (pc[b] - pc[a])
                slope[J] += c * (ps[b] - ps[a])
                l, h = c * (pl[b] - pl[a]), c * (ph[b] - ph[a])
                if c < 0:
                    l, h = h, l
                lo[J] += l
                hi[J] += h
        return self._like(const, slope, lo, hi, defined)

    # -- arithmetic -------------------------------------------------------------

    @staticmethod
    def linear(template: "LevelFunction", parts) -> "LevelFunction":
        """``Σ c · g`` over ``(c, g)`` pairs on a common stage."""
        n = template.n
        const, slope, lo, hi = [ZERO] * n, [ZERO] * n, [ZERO] * n, [ZERO] * n
        defined = [True] * n
        for c, g in parts:
            c = Q(c)
            for J in range(n):
                if not g.defined[J]:
                    defined[J] = False
                    continue
                const[J] += c * g.const[J]
                slope[J] += c * g.slope[J]
                l, h = c * g.lo[J], c * g.hi[J]
                if c < 0:
                    l, h = h, l
                lo[J] += l
                hi[J] += h
        return template._like(const, slope, lo, hi, defined)

    def __sub__(self, other: "LevelFunction") -> "LevelFunction":
        return LevelFunction.linear(self, [(1, self), (-1, other)])

    def __add__(self, other: "LevelFunction") -> "LevelFunction":
        return LevelFunction.linear(self, [(1, self), (1, other)])

    def add_constant(self, c, spread=ZERO) -> "LevelFunction":
        c, spread = Q(c), Q(spread)
        return self._like([v + c for v in self.const], list(self.slope), list(self.lo),
                          [h + spread for h in self.hi], list(self.defined))

    # -- queries ----------------------------------------------------------------

    def undefined_mass(self) -> Fraction:
        """Normalized mass of undefined levels plus the part of the space no stage-m level covers."""
        L = self.sys.normalization
        covered = self.sys.stages[self.m].ambient_length
        return (self.width * self.defined.count(False) + L - covered) / L

    def is_exact(self) -> bool:
        return all(self.defined) and not any(h - l for l, h in zip(self.lo, self.hi))

    def value_at(self, x) -> tuple[Fraction, Fraction] | None:
        """Enclosure of the value at ``x``, or None on an undefined level."""
        x = Q(x)
        _, inv = self.sys.cells(self.m)
        w = self.width
        p = int(x // w)
        J = inv[p]
        if not self.defined[J]:
            return None
        v = self.const[J] + self.slope[J] * (x - p * w)
        return v + self.lo[J], v + self.hi[J]

    def integral_bracket(self) -> tuple[Fraction, Fraction]:
        """Enclosure of ``∫ f dλ`` over the defined levels (λ normalized)."""
        w = self.width
        lo_sum = hi_sum = ZERO
        for c, s, l, h, d in zip(self.const, self.slope, self.lo, self.hi, self.defined):
            if d:
                core = c + s * w / 2
                lo_sum += core + l
                hi_sum += core + h
        scale = w / self.sys.normalization
        return lo_sum * scale, hi_sum * scale

    def sq_norm(self) -> Bracket:
        """Enclosure of ``∫ f² dλ`` over the defined levels."""
        w = self.width
        lower = upper = ZERO
        for c, s, l, h, d in zip(self.const, self.slope, self.lo, self.hi, self.defined):
            if not d:
                continue
            if l == h:
                v = _sq_integral(c + l, s, ZERO, w)
                lower += v
                upper += v
                continue
            p0, q0 = c + l, c + h
            cuts = {ZERO, w}
            if s:
                for root in (-p0 / s, -q0 / s, -(p0 + q0) / (2 * s)):
                    if 0 < root < w:
                        cuts.add(root)
            cuts = sorted(cuts)
            for a, b in zip(cuts, cuts[1:]):
                mid = (a + b) / 2
                pm, qm = p0 + s * mid, q0 + s * mid
                upper += _sq_integral(q0 if pm + qm >= 0 else p0, s, a, b)
                if pm > 0:
                    lower += _sq_integral(p0, s, a, b)
                elif qm < 0:
                    lower += _sq_integral(q0, s, a, b)
        scale = 1 / self.sys.normalization
        return Bracket(lower * scale, upper * scale, self.undefined_mass())

    def to_step_function(self) -> StepFunction:
        if not self.is_exact() or any(self.slope):
            raise ValueError("not an exact level-constant function")
        cells, _ = self.sys.cells(self.m)
        w = self.width
        order = sorted(range(self.n), key=cells.__getitem__)
        return StepFunction.from_pieces([(cells[J] * w, self.const[J]) for J in order],
                                        self.sys.normalization)


def value_range(f: Function) -> tuple[Fraction, Fraction]:
    """``(inf f, sup f)`` over the domain."""
    vals = f.values
    return min(vals), max(vals)


def _sq_integral(c, s, a, b) -> Fraction:
    """``∫_a^b (c + s u)² du``."""
    A, B = c + s * a, c + s * b
    return (b - a) * (A * A + A * B + B * B) / 3
