from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sirsn.dyadic import (DyadicScalar, InvalidIntervalError, ModelParams, Ordering, ParameterError,
                          PathCost, admissable_length_bound, compare_costs, dedupe_consecutive,
                          edge_cost, height, is_admissable, is_height_monotone, parse_gamma, peak,
                          unit_height)

G = Fraction(3, 4)


def D(x):
    return DyadicScalar.of(x)


@pytest.mark.parametrize("x, h", [(96, 5), (72, 3), (1, 0), (Fraction(3, 4), -2), (-8, 3),
                                  (Fraction(-1, 2), -1)])
def test_height_examples(x, h):
    assert height(x) == h


def test_height_of_zero_is_infinite():
    assert height(0) == float("inf")


def test_unit_height_matches_height():
    for n in (-12, -3, 1, 6, 40):
        for level in (-3, 0, 2):
            assert unit_height(n, level) == height(Fraction(n) * Fraction(2) ** level)


@given(st.integers(min_value=-10**6, max_value=10**6).filter(bool), st.integers(-8, 8))
def test_height_leaves_odd_quotient(n, level):
    x = Fraction(n) * Fraction(2) ** level
    q = x / Fraction(2) ** height(x)
    assert q.denominator == 1 and q.numerator % 2 == 1


@pytest.mark.parametrize("m1, m2, p", [(3, 5, 4), (-3, 5, 0), (Fraction(1, 3), Fraction(1, 2), Fraction(1, 2)),
                                        (72, 100, 96), (7, 7, 7)])
def test_peak_examples(m1, m2, p):
    assert peak(m1, m2) == p


def test_peak_reversed_interval_errors():
    with pytest.raises(InvalidIntervalError):
        peak(5, 3)


def test_peak_is_unique_argmax_exhaustive():
    rng = np.random.default_rng(1)
    for _ in range(300):
        w = int(rng.integers(0, 1 << 12))
        a = int(rng.integers(-(1 << 14), 1 << 14))
        xs = range(a, a + w + 1)
        hs = [height(x) for x in xs]
        top = max(hs)
        assert hs.count(top) == 1
        assert peak(a, a + w) == xs[hs.index(top)]


def test_parse_gamma_rejects_out_of_range():
    for bad in (Fraction(1, 2), 1, Fraction(3, 2), 0):
        with pytest.raises(ParameterError):
            parse_gamma(bad)
    assert parse_gamma("3/4") == G


def test_model_params_rejects_bad_seed():
    with pytest.raises(ParameterError):
        ModelParams(master_seed=-1)


def test_edge_cost_examples():
    assert edge_cost("horizontal", 3, 2) == PathCost({0: D(2)})
    assert edge_cost("vertical", Fraction(1, 2), 1) == PathCost({-1: D(1)})
    axis = edge_cost("horizontal", 0, 5)
    assert axis.ledger == {} and axis.zero_cost_length == D(5)
    with pytest.raises(ValueError):
        edge_cost("diagonal", 1, 1)
    with pytest.raises(ValueError):
        edge_cost("horizontal", 1, -1)


def test_compare_costs_examples():
    assert compare_costs(PathCost({0: D(2)}), PathCost({1: D(1)}), G) is Ordering.GREATER
    a = PathCost({1: D(2)})
    assert compare_costs(a, a, G) is Ordering.EQUAL
    assert compare_costs(a, PathCost({0: D(1), 2: D(1)}), G) is Ordering.LESS
    assert compare_costs(PathCost(), PathCost({}, D(3)), G) is Ordering.EQUAL


def test_scaled_cost_shifts_heights():
    c = PathCost({0: D(1), -2: D(Fraction(1, 4))})
    s = c.scaled_by_two()
    assert s.ledger == {1: D(2), -1: D(Fraction(1, 2))}
    assert s.evaluate(G) == 2 * G * c.evaluate(G)


ledgers = st.dictionaries(st.integers(-6, 6), st.integers(1, 64).map(lambda m: DyadicScalar(m, -3)),
                          max_size=5).map(PathCost)


@settings(max_examples=400)
@given(ledgers, ledgers, st.sampled_from([Fraction(3, 4), Fraction(2, 3), Fraction(5, 8), Fraction(7, 9)]))
def test_compare_costs_agrees_with_high_precision(a, b, g):
    with mpmath.workprec(256):
        gm = mpmath.mpf(g.numerator) / g.denominator
        va = mpmath.fsum(gm ** h * mpmath.mpf(L.to_fraction().numerator) / L.to_fraction().denominator
                         for h, L in a.ledger.items())
        vb = mpmath.fsum(gm ** h * mpmath.mpf(L.to_fraction().numerator) / L.to_fraction().denominator
                         for h, L in b.ledger.items())
        expected = Ordering((va > vb) - (va < vb))
    assert compare_costs(a, b, g) is expected
    assert compare_costs(b, a, g) is Ordering(-expected)


def test_sequence_examples():
    assert is_admissable((75, 74, 72, 80, 96, 100, 99))
    assert is_height_monotone((96, 80, 72, 74, 75))
    assert not is_height_monotone((4, 8))
    assert not is_admissable((4, 12, 8))
    assert admissable_length_bound((75, 74, 72, 80, 96, 100, 99))
    assert admissable_length_bound((5,))
    with pytest.raises(ValueError):
        admissable_length_bound((4, 12, 8))
    with pytest.raises(ValueError):
        is_admissable(())


def _random_monotone(rng, start_height, length):
    """Random height-monotone sequence starting at an odd multiple of 2**start_height."""
    x = Fraction(int(rng.integers(-50, 50)) * 2 + 1) * Fraction(2) ** start_height
    out = [x]
    h = start_height
    for _ in range(length):
        nh = h - int(rng.integers(1, 3))
        step = Fraction(2) ** nh * (2 * int(rng.integers(0, 1 << max(0, h - nh - 1))) + 1)
        if abs(step) >= Fraction(2) ** h:
            break
        x = x + step * (1 if rng.random() < 0.5 else -1)
        if height(x) != nh:
            break
        out.append(x)
        h = nh
    return out


def test_random_admissable_sequences_obey_length_bound():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(10_000):
        top = int(rng.integers(-2, 8))
        right = _random_monotone(rng, top, int(rng.integers(0, 6)))
        left = [right[0]]
        h = top
        x = right[0]
        for _ in range(int(rng.integers(0, 6))):
            nh = h - int(rng.integers(1, 3))
            y = x + Fraction(2) ** nh * (1 if rng.random() < 0.5 else -1)
            if height(y) != nh or abs(y - x) >= Fraction(2) ** h:
                break
            left.append(y)
            x, h = y, nh
        seq = left[::-1] + right[1:]
        assert is_admissable(seq)
        assert admissable_length_bound(seq)
        checked += 1
    assert checked == 10_000


def test_dedupe_consecutive():
    assert dedupe_consecutive([1, 1, 2, 2, 1, 3, 3]) == [1, 2, 1, 3]


def test_dyadic_scalar_canonical_and_units():
    assert DyadicScalar(12, -2) == DyadicScalar(3, 0)
    assert DyadicScalar(0, 5).units(3) == 0
    assert D(Fraction(3, 4)).units(-3) == 6
    with pytest.raises(ValueError):
        D(Fraction(3, 4)).units(0)
    with pytest.raises(ValueError):
        D(Fraction(1, 3))
