"""Exact dyadic arithmetic: heights, peaks, path costs and admissable sequences.

Everything here is integer or :class:`fractions.Fraction` based.  Costs are
compared exactly by clearing denominators, so ties between minimum-cost
paths are detected without any floating point.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

INFINITE = math.inf

Number = Union[int, Fraction, "DyadicScalar"]


class SirsnError(Exception):
    """Base class for errors raised by this package."""


class InvalidIntervalError(SirsnError, ValueError):
    pass


class ParameterError(SirsnError, ValueError):
    pass


class ResourceLimitError(SirsnError, RuntimeError):
    """A search exceeded its configured hard limit (never truncated silently)."""


class PreconditionError(SirsnError, ValueError):
    pass


def v2(n: int) -> int:
    """2-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("v2(0) is undefined")
    return (n & -n).bit_length() - 1


@dataclass(frozen=True, order=False)
class DyadicScalar:
    """The number ``mantissa * 2**level`` kept in canonical form.

    Canonical form has an odd mantissa, or mantissa 0 with level 0.
    """

    mantissa: int
    level: int = 0

    def __post_init__(self):
        m, lv = int(self.mantissa), int(self.level)
        if m == 0:
            lv = 0
        else:
            s = v2(m)
            m >>= s
            lv += s
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "level", lv)

    @classmethod
    def of(cls, x) -> "DyadicScalar":
        if isinstance(x, DyadicScalar):
            return x
        if isinstance(x, bool):
            raise TypeError("bool is not a dyadic scalar")
        if isinstance(x, int):
            return cls(x, 0)
        if isinstance(x, str):
            x = Fraction(x)
        if isinstance(x, float):
            if not math.isfinite(x):
                raise ValueError(f"not finite: {x}")
            x = Fraction(x)
        if isinstance(x, Fraction):
            den = x.denominator
            if den & (den - 1):
                raise ValueError(f"{x} is not a dyadic rational")
            return cls(x.numerator, -(den.bit_length() - 1))
        raise TypeError(f"cannot make a dyadic scalar from {type(x).__name__}")

    def to_fraction(self) -> Fraction:
        if self.level >= 0:
            return Fraction(self.mantissa << self.level)
        return Fraction(self.mantissa, 1 << -self.level)

    def units(self, level: int) -> int:
        """Integer count of ``2**level`` units; raises if not representable."""
        if self.mantissa == 0:
            return 0
        shift = self.level - level
        if shift < 0:
            raise ValueError(f"{self} is finer than level {level}")
        return self.mantissa << shift

    @classmethod
    def from_units(cls, n: int, level: int) -> "DyadicScalar":
        return cls(n, level)

    def __float__(self):
        return math.ldexp(float(self.mantissa), self.level)

    def __str__(self):
        f = self.to_fraction()
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"

    def __repr__(self):
        return f"DyadicScalar({self})"

    def _coerce(self, other):
        try:
            return DyadicScalar.of(other)
        except (TypeError, ValueError):
            return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        lv = min(self.level, o.level)
        return DyadicScalar(self.units(lv) + o.units(lv), lv)

    __radd__ = __add__

    def __neg__(self):
        return DyadicScalar(-self.mantissa, self.level)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return DyadicScalar(self.mantissa * o.mantissa, self.level + o.level)

    __rmul__ = __mul__

    def __abs__(self):
        return DyadicScalar(abs(self.mantissa), self.level)

    def _cmp(self, other):
        o = self._coerce(other)
        if o is None:
            return None
        lv = min(self.level, o.level)
        a, b = self.units(lv), o.units(lv)
        return (a > b) - (a < b)

    def __eq__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c == 0

    def __hash__(self):
        return hash((self.mantissa, self.level))

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    def __bool__(self):
        return self.mantissa != 0


def _as_fraction(x) -> Fraction:
    if isinstance(x, DyadicScalar):
        return x.to_fraction()
    return Fraction(x)


def height(x) -> int | float:
    """Height of a dyadic rational: ``j`` with ``x = (2k+1) 2**j``; ``inf`` for 0."""
    if isinstance(x, DyadicScalar):
        return INFINITE if x.mantissa == 0 else x.level
    if isinstance(x, int):
        return INFINITE if x == 0 else v2(x)
    return height(DyadicScalar.of(x))


def unit_height(n: int, level: int) -> int | float:
    """Height of ``n * 2**level`` for an integer count ``n`` of units."""
    return INFINITE if n == 0 else v2(n) + level


def peak(m1, m2):
    """The unique number of maximal height in the closed interval [m1, m2].

    Works for integers and for dyadic rationals; for integer input the
    result is an integer.
    """
    a, b = _as_fraction(m1), _as_fraction(m2)
    if a > b:
        raise InvalidIntervalError(f"empty interval [{m1}, {m2}]")
    if a <= 0 <= b:
        res = Fraction(0)
    elif a < 0:
        res = -_peak_positive(-b, -a)
    else:
        res = _peak_positive(a, b)
    if isinstance(m1, int) and isinstance(m2, int):
        return int(res)
    return res if not isinstance(m1, DyadicScalar) else DyadicScalar.of(res)


def _peak_positive(a: Fraction, b: Fraction) -> Fraction:
    # largest k with a multiple of 2**k inside [a, b]
    k = b.numerator.bit_length() - b.denominator.bit_length() + 1
    while True:
        step = Fraction(2) ** k
        m = math.ceil(a / step) * step
        if m <= b:
            return m
        k -= 1


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def parse_gamma(gamma) -> Fraction:
    """Parse and validate the cost parameter; it must be rational in (1/2, 1)."""
    if isinstance(gamma, float):
        raise ParameterError("gamma must be an exact rational (e.g. '3/4'), not a float")
    g = Fraction(gamma)
    if not (Fraction(1, 2) < g < 1):
        raise ParameterError(f"gamma must lie strictly between 1/2 and 1, got {g}")
    return g


@dataclass(frozen=True)
class PathCost:
    """Exact cost ledger: finite height -> travelled length, plus axis length.

    The cost at ``gamma`` is ``sum(gamma**h * L_h)``; travel on the axes
    (infinite height) is free and only tallied.
    """

    ledger: Mapping[int, DyadicScalar] = field(default_factory=dict)
    zero_cost_length: DyadicScalar = DyadicScalar(0)

    def __post_init__(self):
        clean = {}
        for h, L in self.ledger.items():
            L = DyadicScalar.of(L)
            if L < 0:
                raise ValueError("negative length in cost ledger")
            if L:
                clean[int(h)] = L
        object.__setattr__(self, "ledger", dict(sorted(clean.items())))
        z = DyadicScalar.of(self.zero_cost_length)
        if z < 0:
            raise ValueError("negative zero-cost length")
        object.__setattr__(self, "zero_cost_length", z)

    def __add__(self, other: "PathCost") -> "PathCost":
        led = dict(self.ledger)
        for h, L in other.ledger.items():
            led[h] = led.get(h, DyadicScalar(0)) + L
        return PathCost(led, self.zero_cost_length + other.zero_cost_length)

    def __eq__(self, other):
        if not isinstance(other, PathCost):
            return NotImplemented
        return self.ledger == other.ledger and self.zero_cost_length == other.zero_cost_length

    def __hash__(self):
        return hash((tuple(self.ledger.items()), self.zero_cost_length))

    def evaluate(self, gamma) -> Fraction:
        g = Fraction(gamma)
        return sum((g ** h * L.to_fraction() for h, L in self.ledger.items()), Fraction(0))

    def total_length(self) -> DyadicScalar:
        tot = self.zero_cost_length
        for L in self.ledger.values():
            tot = tot + L
        return tot

    def scaled_by_two(self) -> "PathCost":
        two = DyadicScalar(1, 1)
        return PathCost({h + 1: L * two for h, L in self.ledger.items()},
                        self.zero_cost_length * two)

    def as_json(self) -> dict:
        return {str(h): str(L) for h, L in self.ledger.items()}


def edge_cost(axis: str, line_coordinate, length) -> PathCost:
    """Cost of travelling ``length`` along the line ``axis = line_coordinate``.

    ``axis`` names the direction of travel ('horizontal' runs along a line
    y = const).  Only the height of the line matters.
    """
    if axis not in ("horizontal", "vertical"):
        raise ValueError(f"unknown axis {axis!r}")
    L = DyadicScalar.of(length)
    if L < 0:
        raise ValueError("negative length")
    h = height(DyadicScalar.of(line_coordinate))
    if h == INFINITE:
        return PathCost({}, L)
    return PathCost({h: L})


def cost_numerator(ledger: Mapping[int, DyadicScalar], gamma: Fraction, lo: int, hi: int,
                   level: int) -> int:
    """Integer proportional to the ledger cost, common to ledgers sharing (lo, hi, level).

    Multiplies ``sum(L_h gamma**h)`` by ``p**(-lo) q**hi 2**(-level)``.
    """
    p, q = gamma.numerator, gamma.denominator
    tot = 0
    for h, L in ledger.items():
        tot += L.units(level) * p ** (h - lo) * q ** (hi - h)
    return tot


def compare_costs(a: PathCost, b: PathCost, gamma) -> Ordering:
    """Exact three-way comparison of two path costs at rational ``gamma``."""
    g = parse_gamma(gamma)
    hs = list(a.ledger) + list(b.ledger)
    if not hs:
        return Ordering.EQUAL
    lo, hi = min(hs), max(hs)
    level = min(L.level for L in list(a.ledger.values()) + list(b.ledger.values()))
    x = cost_numerator(a.ledger, g, lo, hi, level)
    y = cost_numerator(b.ledger, g, lo, hi, level)
    return Ordering((x > y) - (x < y))


# ---------------------------------------------------------------------------
# height-monotone and admissable sequences

def is_height_monotone(seq: Sequence) -> bool:
    """Heights strictly decrease and each step is shorter than 2**height."""
    if len(seq) == 0:
        raise ValueError("empty sequence")
    xs = [_as_fraction(s) for s in seq]
    hs = [height(x) for x in xs]
    for j in range(len(xs) - 1):
        if not hs[j + 1] < hs[j]:
            return False
        if hs[j] != INFINITE and abs(xs[j + 1] - xs[j]) >= Fraction(2) ** hs[j]:
            return False
    return True


def is_admissable(seq: Sequence) -> bool:
    """Two height-monotone sequences glued (one reversed) at a common peak."""
    if len(seq) == 0:
        raise ValueError("empty sequence")
    xs = [_as_fraction(s) for s in seq]
    hs = [height(x) for x in xs]
    top = max(hs)
    k = hs.index(top)
    if hs.count(top) > 1:
        return False
    return is_height_monotone(xs[k::-1]) and is_height_monotone(xs[k:])


def admissable_length_bound(seq: Sequence) -> bool:
    """Check that the total step length is at most four times the range."""
    if not is_admissable(seq):
        raise ValueError("sequence is not admissable")
    xs = [_as_fraction(s) for s in seq]
    total = sum((abs(b - a) for a, b in zip(xs, xs[1:])), Fraction(0))
    return total <= 4 * (max(xs) - min(xs))


def dedupe_consecutive(values: Iterable) -> list:
    out = []
    for v in values:
        if not out or out[-1] != v:
            out.append(v)
    return out


@dataclass(frozen=True)
class SearchPolicy:
    """Adaptive doubling of the search box.

    ``initial_extra`` levels are added above the separation scale when the
    search starts; ``max_doublings`` is the hard limit before giving up.
    """

    initial_extra: int = 1
    max_doublings: int = 24


@dataclass(frozen=True)
class ModelParams:
    gamma: Fraction = Fraction(3, 4)
    finest_level: int = -4
    master_seed: int = 0
    search: SearchPolicy = SearchPolicy()

    def __post_init__(self):
        object.__setattr__(self, "gamma", parse_gamma(self.gamma))
        if not (0 <= int(self.master_seed) < 2 ** 64):
            raise ParameterError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "finest_level", int(self.finest_level))
