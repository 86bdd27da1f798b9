"""Exact rational helpers: harmonic numbers, parsing and formatting."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Union

RationalLike = Union[int, str, Fraction]


@lru_cache(maxsize=None)
def harmonic(n: int) -> Fraction:
    """H_n = 1 + 1/2 + ... + 1/n, with H_0 = 0."""
    if n < 0:
        raise ValueError(f"harmonic number of negative index {n}")
    if n == 0:
        return Fraction(0)
    return harmonic(n - 1) + Fraction(1, n)


@lru_cache(maxsize=None)
def harmonic_sq(n: int) -> Fraction:
    """(H_n)^2."""
    h = harmonic(n)
    return h * h


def to_fraction(value: RationalLike) -> Fraction:
    """Convert ints, ``num/den`` strings and fractions to :class:`Fraction`.

    Floats are rejected so that no binary rounding leaks into exact code.
    """
    if isinstance(value, float):
        raise TypeError("floats are not accepted where exact rationals are required")
    return Fraction(value)


def format_rational(value: Fraction) -> str:
    """Render ``value`` as ``num`` or ``num/den``."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


__all__ = ["RationalLike", "format_rational", "harmonic", "harmonic_sq", "to_fraction"]
