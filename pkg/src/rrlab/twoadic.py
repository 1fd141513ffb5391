"""Exact 2-adic digit arithmetic on binary expansions of rationals in [0, 1)."""

from __future__ import annotations

from fractions import Fraction

from .numerics import Q


class Unresolvable(RuntimeError):
    """A value needs more stages (or digits) than are available."""


class EvenDenominator(ValueError):
    pass


MAX_DIGITS = 1 << 14


def binary_digits(x) -> tuple[list[int], list[int]]:
    """Binary expansion of ``x`` in [0, 1) as (pre-period, period)."""
    x = Q(x)
    if not 0 <= x < 1:
        raise ValueError(f"{x} outside [0, 1)")
    seen: dict[Fraction, int] = {}
    digits: list[int] = []
    while x not in seen:
        if len(digits) > MAX_DIGITS:
            raise Unresolvable(f"binary period of {x} exceeds {MAX_DIGITS} digits")
        seen[x] = len(digits)
        x *= 2
        d = int(x >= 1)
        digits.append(d)
        x -= d
    start = seen[x]
    return digits[:start], digits[start:]


def _twoadic_value(pre: list[int], period: list[int]) -> Fraction:
    head = sum(d << i for i, d in enumerate(pre))
    cycle = sum(d << i for i, d in enumerate(period))
    return Fraction(head) + Fraction(2 ** len(pre) * cycle, 1 - 2 ** len(period))


def _twoadic_digits(value: Fraction) -> tuple[list[int], list[int]]:
    u, v = value.numerator, value.denominator
    seen: dict[int, int] = {}
    digits: list[int] = []
    while u not in seen:
        if len(digits) > MAX_DIGITS:
            raise Unresolvable("2-adic period too long")
        seen[u] = len(digits)
        d = u & 1
        digits.append(d)
        u = (u - d * v) // 2
    start = seen[u]
    return digits[:start], digits[start:]


def _real_value(pre: list[int], period: list[int]) -> Fraction:
    head = sum(Fraction(d, 2 ** (i + 1)) for i, d in enumerate(pre))
    cycle = sum(Fraction(d, 2 ** (i + 1)) for i, d in enumerate(period))
    return head + cycle / 2 ** len(pre) / (1 - Fraction(1, 2 ** len(period)))


def two_adic_add(x, gamma) -> Fraction | None:
    """``x + gamma`` with carries running towards finer binary digits.

    Returns None on the null set where the sum ends in all ones, since that
    digit string names a dyadic point whose other expansion is the one stored.
    """
    gamma = Q(gamma)
    if gamma.denominator % 2 == 0:
        raise EvenDenominator(f"{gamma} is not a 2-adic integer")
    pre, period = _twoadic_digits(_twoadic_value(*binary_digits(x)) + gamma)
    if period == [1]:
        return None
    return _real_value(pre, period)


def two_adic_shift_mod(gamma, k: int) -> int:
    """The residue of ``gamma`` modulo ``2^k``."""
    gamma = Q(gamma)
    if gamma.denominator % 2 == 0:
        raise EvenDenominator(f"{gamma} has an even denominator")
    mod = 1 << k
    return gamma.numerator * pow(gamma.denominator, -1, mod) % mod if k else 0
