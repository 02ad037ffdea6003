"""Shared helpers: exact-number parsing, budgets, float formatting."""
from __future__ import annotations

import os
from fractions import Fraction
from numbers import Integral, Rational

import numpy as np

BUDGET_ENV = "TORUS_SPECTRAL_BUDGET"


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured size budget."""


def budget(default: int) -> int:
    """Return the enumeration budget, honouring the environment override."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return int(default)
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ValueError(f"{BUDGET_ENV} must be a number, got {raw!r}") from exc


def check_budget(size: int, default: int, what: str) -> None:
    limit = budget(default)
    if size > limit:
        raise BudgetExceeded(f"{what}: {size} exceeds budget {limit}")


def as_fraction(x) -> Fraction:
    """Convert ints, Fractions, floats (exactly) and decimal strings to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (Integral, np.integer)):
        return Fraction(int(x))
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def fraction_str(x: Fraction) -> str:
    """Decimal string for dyadic/terminating rationals, else 'p/q'."""
    x = Fraction(x)
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(x.numerator)
    scaled = x * 10**digits
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def fmt(x) -> str:
    """17 significant digits, so floats round-trip and reruns are byte-identical."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (Integral, np.integer)):
        return str(int(x))
    x = float(x)
    if x == float("inf"):
        return "inf"
    if x == float("-inf"):
        return "-inf"
    return format(x, ".17g")


def is_power_of_two(n) -> bool:
    return isinstance(n, (Integral, np.integer)) and n >= 1 and (int(n) & (int(n) - 1)) == 0
