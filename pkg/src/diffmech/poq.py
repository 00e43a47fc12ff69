"""Exact discrete quality distributions (PoQ) and rational plumbing.

Every quality level, probability, cost, payoff and utility in this package
is a `fractions.Fraction`. The allocation rule hinges on exact equality
tests between expected welfares, which floating point cannot provide, so
exactness is a hard contract, not an optimization. Scenario files spell
rationals either as fraction strings ("3/10") or as decimal strings
("0.3"); both convert exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class RationalParseError(ValueError):
    """A scenario-file value is not an exact rational literal."""


def parse_rational(value: int | str | Fraction) -> Fraction:
    """Parse "a/b", a decimal string, or an int into an exact Fraction.

    JSON floats are rejected: 0.3 as a float is not 3/10, and silently
    accepting it would corrupt the exact-equality contract.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise RationalParseError(f"not a rational literal: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise RationalParseError(
            f"float {value!r} is inexact; write it as a string like \"3/10\" or \"0.3\""
        )
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise RationalParseError(f"not a rational literal: {value!r}") from exc
    raise RationalParseError(f"not a rational literal: {value!r}")


def format_rational(value: Fraction) -> str:
    """Render exactly: decimal when the expansion terminates, else "a/b".

    4 -> "4", 47/10 -> "4.7", 1/3 -> "1/3".
    """
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{num}/{den}"
    shift = max(twos, fives)
    scaled = abs(num) * 10**shift // den
    digits = str(scaled).rjust(shift + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


def validate_pmf(pairs: Iterable[tuple[Fraction, Fraction]]) -> str | None:
    """Check raw (quality, probability) pairs; return a violation message or None.

    Violations are reported rather than raised so parsers can attribute them
    to a field. Checked in order: quality sign, duplicates/ordering,
    probability range, total mass.
    """
    pairs = list(pairs)
    if not pairs:
        return "empty support"
    seen = set()
    for q, p in pairs:
        if q < 0:
            return f"negative quality {format_rational(q)}"
        if q in seen:
            return f"duplicate quality {format_rational(q)}"
        seen.add(q)
        if not 0 < p <= 1:
            return f"probability {format_rational(p)} for quality {format_rational(q)} outside (0, 1]"
    total = sum(p for _, p in pairs)
    if total != 1:
        return f"total mass {format_rational(total)} != 1"
    return None


@dataclass(frozen=True)
class Pmf:
    """A quality distribution: ordered (quality, probability) support points.

    Probabilities are strictly positive and sum to exactly 1; qualities are
    strictly increasing. Construct via `from_pairs`, which normalizes order
    and drops zero-mass points.
    """

    points: tuple[tuple[Fraction, Fraction], ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int | str | Fraction, int | str | Fraction]]) -> "Pmf":
        norm = [(parse_rational(q), parse_rational(p)) for q, p in pairs]
        norm = sorted((q, p) for q, p in norm if p != 0)
        problem = validate_pmf(norm)
        if problem is not None:
            raise ValueError(f"invalid pmf: {problem}")
        return cls(tuple(norm))

    @classmethod
    def point_mass(cls, quality: int | str | Fraction) -> "Pmf":
        return cls.from_pairs([(quality, 1)])

    @property
    def support(self) -> tuple[Fraction, ...]:
        return tuple(q for q, _ in self.points)

    def probability(self, quality: Fraction) -> Fraction:
        for q, p in self.points:
            if q == quality:
                return p
        return Fraction(0)

    def is_point_mass_at(self, quality: Fraction) -> bool:
        return len(self.points) == 1 and self.points[0][0] == quality

    def __str__(self) -> str:
        inner = ", ".join(f"{format_rational(q)}: {format_rational(p)}" for q, p in self.points)
        return "{" + inner + "}"


def expectation(pmf: Pmf) -> Fraction:
    """Exact expected quality, sum of q * f(q)."""
    return sum((q * p for q, p in pmf.points), start=Fraction(0))


def expected_welfare(pmf: Pmf, cost: Fraction) -> Fraction:
    """Expected quality minus cost: the quantity every allocation rule ranks."""
    return expectation(pmf) - cost


def sample(pmf: Pmf, rng: random.Random) -> Fraction:
    """Draw one quality by inverse CDF over the ordered support.

    The uniform variate is the exact rational randbits(64)/2^64, so a draw
    is a pure function of the generator state: fixed seed, fixed sequence.
    """
    u = Fraction(rng.getrandbits(64), 2**64)
    acc = Fraction(0)
    for q, p in pmf.points:
        acc += p
        if u < acc:
            return q
    return pmf.points[-1][0]


def mixture(components: Sequence[tuple[Fraction, Pmf]]) -> Pmf:
    """Exact mixture sum(weight_i * pmf_i); weights must sum to 1."""
    mass: dict[Fraction, Fraction] = {}
    for weight, pmf in components:
        for q, p in pmf.points:
            mass[q] = mass.get(q, Fraction(0)) + weight * p
    return Pmf.from_pairs(sorted(mass.items()))
