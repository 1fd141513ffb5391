"""Exact-arithmetic laboratory for rigid rank-one transformations and their self-joinings."""

from .rank_one import BUILTIN_SYSTEMS, build, load_descriptor
from .joinings import SHIPPED_JOININGS, apply_operator, disintegrate, load_joining
from .approximation import build_combination, coefficients_at, sot_error, weak_star_error

__version__ = "0.1.0"

__all__ = ["BUILTIN_SYSTEMS", "build", "load_descriptor", "SHIPPED_JOININGS", "apply_operator",
           "disintegrate", "load_joining", "build_combination", "coefficients_at", "sot_error",
           "weak_star_error"]
