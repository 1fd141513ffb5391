"""Closed-form self-joinings and their fiber disintegrations.

Three families are supported: finite mixtures of off-diagonal (graph)
joinings ``J(n)``, mixtures of the product joining with such a combination,
and graph joinings of 2-adic translations of the dyadic odometer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Union

from .levelfun import LevelFunction, function_stage, value_range
from .numerics import (Function, IntervalSet, LineMeasure, Q, StepFunction, format_rational,
                       integral_on, parse_rational)
from .rank_one import BuiltSystem
from .twoadic import EvenDenominator, Unresolvable, two_adic_add, two_adic_shift_mod  # noqa: F401


MARGINAL_LEVEL_CAP = 2**17  # coarser stages give wider but still certified brackets


class JoiningError(ValueError):
    pass


@dataclass(frozen=True)
class OffDiagonalCombo:
    terms: tuple  # ((shift, weight), ...)

    def __post_init__(self):
        merged: dict[int, Fraction] = {}
        for n, p in self.terms:
            p = Q(p)
            if not isinstance(n, int):
                raise JoiningError(f"shift {n!r} is not an integer")
            if p < 0:
                raise JoiningError("weights must be non-negative")
            if p:
                merged[n] = merged.get(n, Fraction(0)) + p
        if sum(merged.values()) != 1:
            raise JoiningError(f"weights sum to {sum(merged.values())}, not 1")
        object.__setattr__(self, "terms", tuple(sorted(merged.items())))


@dataclass(frozen=True)
class ProductMix:
    """``alpha * (λ×λ) + (1 - alpha) * combo``."""

    alpha: Fraction
    combo: OffDiagonalCombo

    def __post_init__(self):
        alpha = Q(self.alpha)
        if not 0 <= alpha <= 1:
            raise JoiningError("alpha must lie in [0, 1]")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class TwoAdicGraph:
    """Graph of ``x ↦ x + gamma`` in the odometer's 2-adic digit group."""

    gamma: Fraction

    def __post_init__(self):
        gamma = Q(self.gamma)
        if gamma.denominator % 2 == 0:
            raise EvenDenominator(f"{gamma} is not a 2-adic integer")
        object.__setattr__(self, "gamma", gamma)


Joining = Union[OffDiagonalCombo, ProductMix, TwoAdicGraph]


def J(n: int) -> OffDiagonalCombo:
    return OffDiagonalCombo(((n, 1),))


def product() -> ProductMix:
    return ProductMix(Fraction(1), J(0))


def combo_of(joining: Joining) -> tuple[Fraction, OffDiagonalCombo | None]:
    """``(alpha, combo)`` view of the first two families."""
    if isinstance(joining, OffDiagonalCombo):
        return Fraction(0), joining
    if isinstance(joining, ProductMix):
        return joining.alpha, joining.combo
    return Fraction(0), None


def joining_from_dict(data: dict) -> Joining:
    try:
        kind = data["type"]
        if kind == "offdiag":
            return OffDiagonalCombo(tuple((int(n), parse_rational(str(p))) for n, p in data["terms"]))
        if kind == "productmix":
            return ProductMix(parse_rational(str(data["alpha"])), joining_from_dict(data["combo"]))
        if kind == "twoadic":
            return TwoAdicGraph(parse_rational(str(data["gamma"])))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise JoiningError(f"malformed joining descriptor: {exc}") from exc
    raise JoiningError(f"unknown joining type {data.get('type')!r}")


def joining_to_dict(joining: Joining) -> dict:
    if isinstance(joining, OffDiagonalCombo):
        return {"type": "offdiag", "terms": [[n, format_rational(p)] for n, p in joining.terms]}
    if isinstance(joining, ProductMix):
        return {"type": "productmix", "alpha": format_rational(joining.alpha),
                "combo": joining_to_dict(joining.combo)}
    return {"type": "twoadic", "gamma": format_rational(joining.gamma)}


SHIPPED_JOININGS = {
    "shift1": J(1),
    "mix03": OffDiagonalCombo(((0, Fraction(1, 2)), (3, Fraction(1, 2)))),
    "product": product(),
    "productmix": ProductMix(Fraction(1, 3), OffDiagonalCombo(((0, Fraction(1, 2)), (2, Fraction(1, 2))))),
    "twoadic": TwoAdicGraph(Fraction(-1, 3)),
}


def load_joining(source: str | Path) -> Joining:
    if str(source) in SHIPPED_JOININGS:
        return SHIPPED_JOININGS[str(source)]
    with open(source) as fh:
        try:
            return joining_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise JoiningError(f"{source}: {exc}") from exc


def check_attachable(joining: Joining, sys: BuiltSystem) -> None:
    if isinstance(joining, TwoAdicGraph) and not sys.is_dyadic_odometer():
        raise JoiningError("2-adic graph joinings only attach to the dyadic odometer")


# ---------------------------------------------------------------------------
# fibers


@dataclass(frozen=True)
class FiberMeasure:
    """``alpha`` times normalized Lebesgue on ``[0, length)`` plus atoms."""

    atoms: tuple
    alpha: Fraction
    length: Fraction
    unresolved_mass: Fraction = Fraction(0)

    def total(self) -> Fraction:
        return self.alpha + sum((w for _, w in self.atoms), Fraction(0))

    def mass_of(self, s: IntervalSet) -> Fraction:
        mass = sum((w for x, w in self.atoms if s.contains(x)), Fraction(0))
        if self.alpha:
            mass += self.alpha * s.intersect(IntervalSet.interval(0, self.length)).measure() / self.length
        return mass

    def to_line_measure(self) -> LineMeasure:
        density = StepFunction.constant(self.alpha / self.length, self.length) if self.alpha else None
        return LineMeasure(self.atoms, density)

    def integrate(self, f: Function) -> Fraction:
        total = sum((w * f(x) for x, w in self.atoms), Fraction(0))
        if self.alpha:
            total += self.alpha * integral_on(f, 0, self.length) / self.length
        return total


def disintegrate(joining: Joining, sys: BuiltSystem, x) -> FiberMeasure:
    x = Q(x)
    length = sys.normalization
    if isinstance(joining, TwoAdicGraph):
        check_attachable(joining, sys)
        y = two_adic_add(x, joining.gamma)
        if y is None:
            return FiberMeasure((), Fraction(0), length, Fraction(1))
        return FiberMeasure(((y, Fraction(1)),), Fraction(0), length)
    alpha, combo = combo_of(joining)
    atoms: dict[Fraction, Fraction] = {}
    lost = Fraction(0)
    for n, p in combo.terms:
        w = (1 - alpha) * p
        if not w:
            continue
        y = sys.apply_power(x, n)
        if y is None:
            lost += w
        else:
            atoms[y] = atoms.get(y, Fraction(0)) + w
    return FiberMeasure(tuple(sorted(atoms.items())), alpha, length, lost)


def apply_operator(joining: Joining, sys: BuiltSystem, f: Function | LevelFunction,
                   stage: int | None = None) -> LevelFunction:
    """``A_σ f`` on the stage-``stage`` level grid (default: the resolution stage of K).

    Values are exact wherever the needed images are translations; elsewhere
    the result carries certified brackets or undefined levels.
    """
    if stage is None:
        stage = f.m if isinstance(f, LevelFunction) else function_stage(sys, f)
    m = stage
    g = f if isinstance(f, LevelFunction) else LevelFunction.from_function(sys, m, f)
    if isinstance(joining, TwoAdicGraph):
        check_attachable(joining, sys)
        return g.cyclic_relabel(two_adic_shift_mod(joining.gamma, g.m))
    alpha, combo = combo_of(joining)
    rng = None if isinstance(f, LevelFunction) else value_range(f)
    parts = [((1 - alpha) * p, g.shift(n, rng)) for n, p in combo.terms if (1 - alpha) * p]
    out = LevelFunction.linear(g, parts)
    if alpha:
        mean = _mean(f, sys) if not isinstance(f, LevelFunction) else None
        if mean is None:
            lo, hi = g.integral_bracket()
            out = out.add_constant(alpha * lo, alpha * (hi - lo))
        else:
            out = out.add_constant(alpha * mean)
    return out


def _mean(f: Function, sys: BuiltSystem) -> Fraction:
    return integral_on(f, 0, sys.normalization) / sys.normalization


def marginal_audit(joining: Joining, sys: BuiltSystem, probes: list[IntervalSet]) -> list[dict]:
    """Check ``∫ σ_x(B) dλ(x) = λ(B)`` for each probe set ``B``.

    The left side is computed as the integral of ``A_σ 1_B``; rows report the
    certified bracket for it next to the exact right side.  ``A_σ 1_B`` takes
    values in [0, 1], so undefined levels widen the upper end by their mass.
    """
    L = sys.normalization
    rows = []
    for B in probes:
        ind = StepFunction.indicator(B, L)
        m = function_stage(sys, ind)
        while m > 0 and sys.stages[m].height > MARGINAL_LEVEL_CAP:
            m -= 1
        g = apply_operator(joining, sys, ind, m)
        lo, hi = g.integral_bracket()
        hi += g.undefined_mass()
        rhs = B.measure() / L
        rows.append({"probe": B, "lhs_lo": lo, "lhs_hi": hi, "rhs": rhs,
                     "exact": lo == hi, "pass": lo <= rhs <= hi})
    return rows

