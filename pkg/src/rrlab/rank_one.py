"""Rank-one cutting-and-stacking transformations.

Stage 0 is the unit interval as a tower of height one.  To pass from stage k
to stage k+1 the base is cut into ``r_k`` equal columns, ``s_{k,c}`` fresh
spacer intervals (appended at the right end of the current space) are put on
top of column ``c``, and the columns are stacked left to right.  Levels are
never stored; they are recomputed from the column data on demand, which keeps
deep odometer builds cheap.

Everything at a fixed stage ``m`` is also available in an integer model:
every endpoint at stage ``m`` is a multiple of the level width ``w_m``, and the
stage-``m`` tower tiles ``[0, L_m)``, so the levels are a permutation of the
``n_m`` cells of width ``w_m``.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, Sequence

from .numerics import IntervalSet, Q
from .twoadic import two_adic_add

#: Levels above this count are not materialized as integer arrays.
LEVEL_CAP = 2**21
FAST_CAP = 2**20  # tallest top stage whose cell permutation is cached for point maps


class DepthExceeded(RuntimeError):
    """The requested computation needs more stages than were built."""


class DescriptorError(ValueError):
    """A construction descriptor is malformed or violates its invariants."""


@dataclass(frozen=True)
class ConstructionDescriptor:
    name: str
    cuts: Callable[[int], int]
    spacers: Callable[[int, int], int]
    max_stage: int
    #: first stage from which no spacer is ever added again (None: never known)
    spacer_free_from: int | None = None

    def validate(self, upto: int | None = None) -> None:
        upto = self.max_stage if upto is None else upto
        if self.max_stage < 0:
            raise DescriptorError("max_stage must be non-negative")
        for k in range(upto):
            r = self.cuts(k)
            if not isinstance(r, int) or r < 2:
                raise DescriptorError(f"{self.name}: r_{k} = {r!r} must be an integer >= 2")
            for c in range(r):
                s = self.spacers(k, c)
                if not isinstance(s, int) or s < 0:
                    raise DescriptorError(f"{self.name}: s_{k},{c} = {s!r} must be a non-negative integer")


def odometer(max_stage: int = 40) -> ConstructionDescriptor:
    return ConstructionDescriptor("odometer", lambda k: 2, lambda k, c: 0, max_stage, 0)


def rigid_spacered(max_stage: int = 8) -> ConstructionDescriptor:
    return ConstructionDescriptor(
        "rigid-spacered", lambda k: k + 2, lambda k, c: 1 if c == k + 1 else 0, max_stage, None)


def chacon(max_stage: int = 10) -> ConstructionDescriptor:
    return ConstructionDescriptor("chacon", lambda k: 3, lambda k, c: 1 if c == 1 else 0, max_stage, None)


BUILTIN_SYSTEMS = {"odometer": odometer, "rigid-spacered": rigid_spacered, "chacon": chacon}


def _parse_formula(text: str) -> Callable[[int], int]:
    kind, _, args = text.partition(":")
    try:
        if kind == "const":
            value = int(args)
            return lambda k: value
        if kind == "affine":
            a, b = (int(t) for t in args.split(","))
            return lambda k: a * k + b
    except ValueError as exc:
        raise DescriptorError(f"bad cuts formula {text!r}") from exc
    raise DescriptorError(f"unknown cuts formula {text!r}")


def descriptor_from_dict(data: dict) -> ConstructionDescriptor:
    """Parse the JSON descriptor format.

    ``cuts`` is either a list (entry k is r_k) or an object with a ``formula``
    (``"const:2"`` or ``"affine:a,b"`` meaning ``a*k+b``) and an optional
    ``values`` list whose entries override the formula.  ``spacers`` is a sparse
    list of ``[stage, column, count]``.
    """
    try:
        name = str(data["name"])
        max_stage = int(data["max_stage"])
        raw_cuts = data["cuts"]
        raw_spacers = data.get("spacers", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise DescriptorError(f"malformed descriptor: {exc}") from exc

    if isinstance(raw_cuts, list):
        explicit, formula = list(raw_cuts), None
    elif isinstance(raw_cuts, dict) and "formula" in raw_cuts:
        explicit, formula = list(raw_cuts.get("values", [])), _parse_formula(raw_cuts["formula"])
    else:
        raise DescriptorError("cuts must be a list or {'formula': ...}")
    if not all(isinstance(v, int) for v in explicit):
        raise DescriptorError("explicit cuts must be integers")

    def cuts(k: int) -> int:
        if k < len(explicit):
            return explicit[k]
        if formula is None:
            raise DescriptorError(f"{name}: no cut count for stage {k}")
        return formula(k)

    table: dict[tuple[int, int], int] = {}
    for entry in raw_spacers:
        if not (isinstance(entry, list) and len(entry) == 3 and all(isinstance(v, int) for v in entry)):
            raise DescriptorError(f"spacer entry {entry!r} must be [stage, column, count]")
        stage, col, count = entry
        if stage < 0 or col < 0 or count < 0:
            raise DescriptorError(f"negative spacer entry {entry!r}")
        table[(stage, col)] = table.get((stage, col), 0) + count

    last = max((s for (s, _), n in table.items() if n), default=-1)
    desc = ConstructionDescriptor(name, cuts, lambda k, c: table.get((k, c), 0), max_stage, last + 1)
    desc.validate()
    for (stage, col) in table:
        if stage < max_stage and col >= cuts(stage):
            raise DescriptorError(f"spacer column {col} >= r_{stage} = {cuts(stage)}")
    return desc


def load_descriptor(source: str | Path) -> ConstructionDescriptor:
    """Load a descriptor from a JSON file or a built-in name."""
    if str(source) in BUILTIN_SYSTEMS:
        return BUILTIN_SYSTEMS[str(source)]()
    with open(source) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DescriptorError(f"{source}: {exc}") from exc
    return descriptor_from_dict(data)


# ---------------------------------------------------------------------------
# towers


class TowerStage:
    """Stage-k Rokhlin tower.  Levels are computed lazily from the column data."""

    def __init__(self, stage: int, height: int, width: Fraction, ambient_length: Fraction,
                 prev: "TowerStage | None" = None, cuts: int = 0,
                 col_starts: Sequence[int] = (), spacer_starts: Sequence[int] = ()):
        self.stage = stage
        self.height = height
        self.width = width
        self.ambient_length = ambient_length
        self.prev = prev
        self.cuts = cuts
        # col_starts[c]: index of column c's bottom in this tower (plus a final sentinel)
        self.col_starts = tuple(col_starts)
        # spacer_starts[c]: how many spacers the columns before c received
        self.spacer_starts = tuple(spacer_starts)

    def __repr__(self) -> str:
        return f"TowerStage(k={self.stage}, n={self.height}, width={self.width}, L={self.ambient_length})"

    @property
    def base(self) -> IntervalSet:
        return self.level(0)

    def level_left(self, i: int) -> Fraction:
        if not 0 <= i < self.height:
            raise IndexError(i)
        if self.prev is None:
            return Fraction(0)
        c = bisect.bisect_right(self.col_starts, i) - 1
        t = i - self.col_starts[c]
        if t < self.prev.height:
            return self.prev.level_left(t) + c * self.width
        return self.prev.ambient_length + (self.spacer_starts[c] + t - self.prev.height) * self.width

    def level(self, i: int) -> IntervalSet:
        a = self.level_left(i)
        return IntervalSet.interval(a, a + self.width)

    @property
    def levels(self) -> "LazyLevels":
        return LazyLevels(self)

    def locate(self, x) -> tuple[int, Fraction] | None:
        """``(level index, level left end)`` of ``x``, or None outside the tower."""
        x = Q(x)
        if not 0 <= x < self.ambient_length:
            return None
        if self.prev is None:
            return 0, Fraction(0)
        prev = self.prev
        if x >= prev.ambient_length:
            g = (x - prev.ambient_length) // self.width
            c = bisect.bisect_right(self.spacer_starts, g) - 1
            i = self.col_starts[c] + prev.height + (g - self.spacer_starts[c])
            return int(i), prev.ambient_length + g * self.width
        t, left = prev.locate(x)
        c = (x - left) // self.width
        return self.col_starts[c] + t, left + c * self.width

    def level_index(self, x) -> int | None:
        hit = self.locate(x)
        return None if hit is None else hit[0]

    def partial_map(self) -> Iterator[tuple[IntervalSet, Fraction]]:
        """``(level, offset)`` pairs realizing T off the top level."""
        for i in range(self.height - 1):
            a = self.level_left(i)
            yield IntervalSet.interval(a, a + self.width), self.level_left(i + 1) - a


class LazyLevels(Sequence):
    def __init__(self, stage: TowerStage):
        self._stage = stage

    def __len__(self) -> int:
        return self._stage.height

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        return self._stage.level(i)


class BuiltSystem:
    """A rank-one system built through stage ``K``; immutable after :func:`build`."""

    def __init__(self, descriptor: ConstructionDescriptor, stages: list[TowerStage]):
        self.descriptor = descriptor
        self.stages = stages
        self._cells: dict[int, tuple[list[int], list[int]]] = {}
        self._labels: dict[tuple[int, int], list[int]] = {}
        self._dyadic = descriptor.spacer_free_from == 0 and all(
            descriptor.cuts(k) == 2 for k in range(len(stages)))

    def __repr__(self) -> str:
        return f"BuiltSystem({self.descriptor.name!r}, K={self.K})"

    @property
    def K(self) -> int:
        return len(self.stages) - 1

    @property
    def normalization(self) -> Fraction:
        return self.stages[-1].ambient_length

    @property
    def top(self) -> TowerStage:
        return self.stages[-1]

    def stage(self, k: int) -> TowerStage:
        if not 0 <= k <= self.K:
            raise DepthExceeded(f"stage {k} not built (K={self.K})")
        return self.stages[k]

    def wraps_at(self, m: int) -> bool:
        """True when T^{n_m} maps each stage-m level onto itself (no spacers from m on)."""
        sff = self.descriptor.spacer_free_from
        return sff is not None and m >= sff

    def is_dyadic_odometer(self) -> bool:
        return self._dyadic

    # -- points ------------------------------------------------------------

    def level_index(self, k: int, x) -> int | None:
        top = self.top
        if top.height > FAST_CAP:
            return self.stage(k).level_index(x)
        x = Q(x)
        if not 0 <= x < top.ambient_length:
            return None
        w = top.width
        _, inv = self.cells(self.K)
        lab = self.labels(k, self.K)[inv[x.numerator * w.denominator // (x.denominator * w.numerator)]]
        return lab if lab >= 0 else None

    def apply_power(self, x, i: int) -> Fraction | None:
        """``T^i(x)``, or None when it is not determined by stage K.

        The dyadic odometer is resolved at any depth by adding ``i`` to the
        2-adic digits of ``x``.
        """
        x = Q(x)
        top = self.top
        if top.height <= FAST_CAP:
            perm, inv = self.cells(self.K)
            w = top.width
            p = x.numerator * w.denominator // (x.denominator * w.numerator)
            if not 0 <= x < top.ambient_length:
                raise ValueError(f"{x} outside [0, {top.ambient_length})")
            J = inv[p]
            if 0 <= J + i < top.height:
                return x + (perm[J + i] - p) * w
        else:
            hit = top.locate(x)
            if hit is None:
                raise ValueError(f"{x} outside [0, {top.ambient_length})")
            J, left = hit
            if 0 <= J + i < top.height:
                return x - left + top.level_left(J + i)
        if self._dyadic:
            return two_adic_add(x, i)
        return None

    # -- sets --------------------------------------------------------------

    def image_set(self, s: IntervalSet, i: int) -> tuple[IntervalSet, Fraction]:
        """Exact image of the resolvable part of ``s`` under ``T^i``, plus the unresolved mass."""
        if i == 0:
            return s, Fraction(0)
        out: list[tuple[Fraction, Fraction]] = []
        unresolved = Fraction(0)
        K = self.K
        todo = [(a, b, 0) for a, b in s]
        while todo:
            a, b, m = todo.pop()
            st = self.stages[m]
            if b > st.ambient_length:
                cut = max(a, st.ambient_length)
                if m < K:
                    todo.append((cut, b, m + 1))
                else:
                    raise ValueError(f"set leaves [0, {st.ambient_length})")
                b = cut
            x = a
            while x < b:
                J, left = st.locate(x)
                right = min(b, left + st.width)
                target = J + i
                if 0 <= target < st.height:
                    shift = st.level_left(target) - left
                    out.append((x + shift, right + shift))
                elif self.wraps_at(m) and x == left and right == left + st.width:
                    dest = st.level_left(target % st.height)
                    out.append((dest, dest + st.width))
                elif m < K:
                    todo.append((x, right, m + 1))
                else:
                    unresolved += right - x
                x = right
        return IntervalSet(tuple(out)), unresolved

    # -- integer model at a fixed stage ------------------------------------

    def resolution_stage(self, k: int) -> int:
        """Stage at which set computations for stage ``k`` are carried out.

        Wrap-exact systems use the first stage ``>= k`` past their last spacer;
        others use K, which must be small enough to materialize.
        """
        sff = self.descriptor.spacer_free_from
        if sff is not None and max(k, sff) <= self.K:
            return max(k, sff)
        if self.top.height > LEVEL_CAP:
            raise DepthExceeded(f"n_K = {self.top.height} exceeds the level cap {LEVEL_CAP}")
        return self.K

    def cells(self, m: int) -> tuple[list[int], list[int]]:
        """``(cell, level)``: ``cell[J]`` is the position of level J in units of ``w_m``; ``level`` inverts it."""
        if m in self._cells:
            return self._cells[m]
        if self.stage(m).height > LEVEL_CAP:
            raise DepthExceeded(f"stage {m} has {self.stage(m).height} levels (cap {LEVEL_CAP})")
        perm = [0]
        for t in range(m):
            st = self.stages[t]
            r = self.descriptor.cuts(t)
            spacer_base = st.height * r
            nxt: list[int] = []
            seen = 0
            for c in range(r):
                nxt.extend(p * r + c for p in perm)
                s = self.descriptor.spacers(t, c)
                nxt.extend(range(spacer_base + seen, spacer_base + seen + s))
                seen += s
            perm = nxt
        inv = [0] * len(perm)
        for J, p in enumerate(perm):
            inv[p] = J
        self._cells[m] = (perm, inv)
        return perm, inv

    def labels(self, k: int, m: int) -> list[int]:
        """Stage-k level of each stage-m level (``-1`` for spacers added after stage k)."""
        key = (k, m)
        if key in self._labels:
            return self._labels[key]
        if not 0 <= k <= m <= self.K:
            raise DepthExceeded(f"labels({k}, {m}) with K={self.K}")
        if self.stage(m).height > LEVEL_CAP:
            raise DepthExceeded(f"stage {m} too tall to label")
        lab = list(range(self.stages[k].height))
        for t in range(k, m):
            nxt: list[int] = []
            for c in range(self.descriptor.cuts(t)):
                nxt.extend(lab)
                nxt.extend([-1] * self.descriptor.spacers(t, c))
            lab = nxt
        self._labels[key] = lab
        return lab

    def shifted_level(self, m: int, J: int, i: int) -> int | None:
        """Stage-m level containing ``T^i`` of level J (as a set), or None if unresolved."""
        n = self.stages[m].height
        t = J + i
        if 0 <= t < n:
            return t
        if self.wraps_at(m):
            return t % n
        return None


def build(descriptor: ConstructionDescriptor, K: int | None = None, den_cap: int | None = None) -> BuiltSystem:
    """Cut and stack through stage ``K`` (default ``descriptor.max_stage``)."""
    K = descriptor.max_stage if K is None else K
    if K < 0:
        raise ValueError("K must be non-negative")
    descriptor.validate(K)
    stages = [TowerStage(0, 1, Fraction(1), Fraction(1))]
    for k in range(K):
        st = stages[-1]
        r = descriptor.cuts(k)
        width = st.width / r
        if den_cap is not None and width.denominator > den_cap:
            raise DepthExceeded(f"stage {k + 1} width {width} exceeds denominator cap {den_cap}")
        col_starts, spacer_starts = [], []
        pos = seen = 0
        for c in range(r):
            col_starts.append(pos)
            spacer_starts.append(seen)
            s = descriptor.spacers(k, c)
            pos += st.height + s
            seen += s
        col_starts.append(pos)
        spacer_starts.append(seen)
        stages.append(TowerStage(k + 1, pos, width, st.ambient_length + seen * width,
                                 st, r, col_starts, spacer_starts))
    return BuiltSystem(descriptor, stages)


def apply_power(sys: BuiltSystem, x, i: int) -> Fraction | None:
    return sys.apply_power(x, i)


def image_set(sys: BuiltSystem, s: IntervalSet, i: int) -> tuple[IntervalSet, Fraction]:
    return sys.image_set(s, i)


def level_index(stage: TowerStage, x) -> int | None:
    return stage.level_index(x)
