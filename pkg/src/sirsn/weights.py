"""Counter-based keyed hashing and the refinement-consistent secondary weights.

Secondary weights are Gaussian increments of an independent Brownian motion
running along every lattice line.  Values at dyadic positions are produced
top-down by midpoint (Levy) refinement, each midpoint drawing its own
normal variate from a keyed hash of its position.  The weight of a unit
edge at the finest level is then standard normal, the edges are i.i.d.,
and the weight of any coarser segment is exactly the sum of the weights of
its sub-edges, while every value can be looked up without touching the
rest of the line.
"""
from __future__ import annotations

import hashlib
import math
from statistics import NormalDist

_MASK64 = (1 << 64) - 1
_INV_2_64 = 1.0 / 18446744073709551616.0
_norm_inv = NormalDist().inv_cdf


def hash_u64(seed: int, *keys: int) -> int:
    """Keyed 64-bit hash of a tuple of (arbitrary size, signed) integers."""
    h = hashlib.blake2b(digest_size=8, key=(seed & _MASK64).to_bytes(8, "little"))
    for k in keys:
        nbytes = (k.bit_length() + 8) // 8 + 1
        h.update(nbytes.to_bytes(2, "little"))
        h.update(k.to_bytes(nbytes, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def hash_uniform(seed: int, *keys: int) -> float:
    """Uniform variate in the open interval (0, 1)."""
    return (hash_u64(seed, *keys) + 0.5) * _INV_2_64


def hash_normal(seed: int, *keys: int) -> float:
    """Standard normal variate by inverse-CDF of :func:`hash_uniform`."""
    return _norm_inv(hash_uniform(seed, *keys))


HORIZONTAL = 0
VERTICAL = 1


class BrownianLineField:
    """Refinement-consistent Gaussian edge weights on every lattice line.

    Positions and line coordinates are integer counts of the finest unit.
    Lines are cut into blocks of ``2**top`` units; on each block an
    independent Brownian path started at 0 is refined by midpoints.  The
    increment over a unit edge has variance 1.

    The field is keyed on integer units only, so a field used at level
    ``H + 1`` with the same integers is the image of the level-``H`` field
    under doubling.
    """

    def __init__(self, seed: int, top: int = 48, cache_limit: int = 2_000_000):
        self.seed = int(seed) & _MASK64
        self.top = top
        self._cache: dict = {}
        self._cache_limit = cache_limit

    def _block_total(self, axis: int, line: int, k: int) -> float:
        return math.sqrt(float(1 << self.top)) * hash_normal(self.seed, 1, axis, line, k)

    def _value_in_block(self, axis: int, line: int, k: int, x: int) -> float:
        size = 1 << self.top
        if x == 0:
            return 0.0
        if x == size:
            return self._block_total(axis, line, k)
        cache = self._cache
        lo, hi = 0, size
        blo, bhi = 0.0, self._block_total(axis, line, k)
        while True:
            mid = (lo + hi) >> 1
            key = (axis, line, k, mid)
            bm = cache.get(key)
            if bm is None:
                sd = math.sqrt((hi - lo) / 4.0)
                bm = 0.5 * (blo + bhi) + sd * hash_normal(self.seed, 2, axis, line, k, mid)
                if len(cache) >= self._cache_limit:
                    cache.clear()
                cache[key] = bm
            if x == mid:
                return bm
            if x < mid:
                hi, bhi = mid, bm
            else:
                lo, blo = mid, bm

    def value(self, axis: int, line: int, x: int) -> float:
        """Brownian value at position ``x`` relative to the start of its block."""
        k = x >> self.top
        return self._value_in_block(axis, line, k, x - (k << self.top))

    def increment(self, axis: int, line: int, a: int, b: int) -> float:
        """Weight of the segment from ``a`` to ``b`` on the given line (signless in order)."""
        if a > b:
            a, b = b, a
        ka, kb = a >> self.top, b >> self.top
        if ka == kb:
            return self.value(axis, line, b) - self.value(axis, line, a)
        tot = self._block_total(axis, line, ka) - self.value(axis, line, a)
        for k in range(ka + 1, kb):
            tot += self._block_total(axis, line, k)
        return tot + self.value(axis, line, b)

    def unit_edge(self, axis: int, line: int, x: int) -> float:
        """Weight of the finest unit edge from ``x`` to ``x + 1``."""
        return self.increment(axis, line, x, x + 1)


class ScaledField:
    """View of a :class:`BrownianLineField` from a coarser integer lattice.

    A position ``n`` in the view corresponds to ``n << shift`` in the base
    field.  Used when routes are computed at a resolution coarser than the
    level at which the weights live.
    """

    def __init__(self, base: BrownianLineField, shift: int):
        if shift < 0:
            raise ValueError("cannot view a field at a finer level than its own")
        self.base, self.shift = base, shift

    def increment(self, axis: int, line: int, a: int, b: int) -> float:
        s = self.shift
        return self.base.increment(axis, line << s, a << s, b << s)


def field_view(base: BrownianLineField, shift: int):
    return base if shift == 0 else ScaledField(base, shift)
