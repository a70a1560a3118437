from fractions import Fraction

import numpy as np
import pytest

from oracles import lattice_min_cost_paths, turns_of, unit_sum_weight
from sirsn.checks import _contains_point, check_compatibility, check_peak, check_sigma2
from sirsn.dyadic import ModelParams, PathCost, PreconditionError, ResourceLimitError, SearchPolicy, peak
from sirsn.routing import (InvarianceParams, RouteEngine, continuum_route, route_multiresolution_consistency,
                           scale_route_by_two)

G = Fraction(3, 4)


@pytest.fixture(scope="module")
def engine0():
    return RouteEngine(ModelParams(finest_level=0, master_seed=3))


def test_worked_example(engine0):
    r = engine0.route((1, 0), (1, 2))
    assert r.turns == ((1, 0), (0, 0), (0, 2), (1, 2))
    assert r.cost.as_json() == {"1": "1"}
    assert r.cost.evaluate(G) == G


def test_worked_example_matches_exhaustive_oracle():
    cost, paths = lattice_min_cost_paths((1, 0), (1, 2), (-4, 8, -4, 8), 0, G)
    assert cost == G
    assert [turns_of(p) for p in paths] == [((1, 0), (0, 0), (0, 2), (1, 2))]


def test_axis_route_is_straight_and_free(engine0):
    r = engine0.route((0, 0), (0, 8))
    assert r.turns == ((0, 0), (0, 8))
    assert r.cost == PathCost({}, 8)


def test_coincident_endpoints_rejected(engine0):
    with pytest.raises(PreconditionError):
        engine0.route((1, 1), (1, 1))


def test_resource_limit_is_reported():
    tiny = RouteEngine(ModelParams(search=SearchPolicy(max_doublings=0)))
    with pytest.raises(ResourceLimitError):
        tiny.route((1, 3), (5, 7))
    lattice = RouteEngine(ModelParams(finest_level=0), strategy="lattice", max_nodes=10)
    with pytest.raises(ResourceLimitError):
        lattice.route((1, 3), (5, 7))


def test_engine_matches_exhaustive_oracle():
    """Exact cost and secondary-weight tie break agree with brute-force Dijkstra."""
    eng = RouteEngine(ModelParams(finest_level=0, master_seed=3))
    rng = np.random.default_rng(0)
    ties = 0
    for _ in range(40):
        a = tuple(int(v) for v in rng.integers(-7, 8, 2))
        b = tuple(int(v) for v in rng.integers(-7, 8, 2))
        if a == b:
            continue
        r = eng.route_units(a, b)
        cost, paths = lattice_min_cost_paths(a, b, (-24, 24, -24, 24), 0, G)
        best = min(paths, key=lambda p: unit_sum_weight(eng.field, p))
        assert r.cost.evaluate(G) == cost
        assert r.turns == turns_of(best)
        assert r.tie_count == len(paths)
        ties += len(paths) > 1
    assert ties > 0


def test_chains_and_lattice_strategies_agree_on_funnel_pair():
    eng = RouteEngine(ModelParams(finest_level=-6))
    d, c = (Fraction(17), Fraction(16) + Fraction(1, 16)), (Fraction("16.59375"), Fraction(18))
    fast = eng.route(d, c)
    slow = eng.at_level(-6, "lattice").route(d, c)
    assert fast.turns == slow.turns
    assert fast.turns == ((1088, 1028), (1088, 1024), (1024, 1024), (1024, 1152), (1062, 1152))


def test_chains_and_lattice_agree_random():
    eng = RouteEngine(ModelParams(finest_level=-1, master_seed=8))
    lat = eng.at_level(-1, "lattice")
    rng = np.random.default_rng(2)
    for _ in range(15):
        a = tuple(int(v) for v in rng.integers(-20, 21, 2))
        b = tuple(int(v) for v in rng.integers(-20, 21, 2))
        if a != b:
            assert eng.route_units(a, b).turns == lat.route_units(a, b).turns


def test_reversal_symmetry_and_determinism():
    rng = np.random.default_rng(4)
    e1 = RouteEngine(ModelParams(finest_level=-2, master_seed=77))
    e2 = RouteEngine(ModelParams(finest_level=-2, master_seed=77))
    for _ in range(30):
        a = tuple(int(v) for v in rng.integers(-200, 201, 2))
        b = tuple(int(v) for v in rng.integers(-200, 201, 2))
        if a == b:
            continue
        r = e1.route_units(a, b)
        assert e1.route_units(b, a).turns == r.reversed().turns
        assert e2.route_units(a, b).turns == r.turns


def test_doubling_example(engine0):
    r = engine0.route((1, 0), (1, 2))
    d = scale_route_by_two(r)
    direct = engine0.doubled().route((2, 0), (2, 4))
    assert d.same_points(direct)
    assert len(d.turns) == len(r.turns)
    assert d.cost.as_json() == {"2": "2"}


def test_sigma2_equivariance_random():
    eng = RouteEngine(ModelParams(finest_level=-1, master_seed=5))
    rng = np.random.default_rng(9)
    for _ in range(40):
        a = tuple(int(v) for v in rng.integers(-100, 101, 2))
        b = tuple(int(v) for v in rng.integers(-100, 101, 2))
        if a != b:
            assert check_sigma2(eng, a, b)


def test_multiresolution_consistency_random():
    eng = RouteEngine(ModelParams(finest_level=-2, master_seed=1))
    rng = np.random.default_rng(3)
    for _ in range(200):
        a = tuple(int(v) for v in rng.integers(-64, 65, 2))
        b = tuple(int(v) for v in rng.integers(-64, 65, 2))
        if a != b:
            assert route_multiresolution_consistency(eng, a, b, -2, 0)
    assert route_multiresolution_consistency(eng, (1, 2), (3, 5), 0, 0)


def test_route_passes_through_peak_point():
    eng = RouteEngine(ModelParams(finest_level=-3, master_seed=2))
    for h in range(1, 7):
        r = eng.route((0, 0), (2 ** h, 2 ** h))
        assert check_peak(r)
        z = peak(0, 2 ** h) * 8
        assert _contains_point(r.turns, (z, z))


def test_first_quadrant_route_stays_in_quadrant():
    eng = RouteEngine(ModelParams(finest_level=-2, master_seed=6))
    rng = np.random.default_rng(12)
    for _ in range(30):
        b = tuple(int(v) for v in rng.integers(1, 300, 2))
        r = eng.route_units((0, 0), b)
        assert all(x >= 0 and y >= 0 for x, y in r.turns)


def test_compatibility_of_overlapping_routes():
    eng = RouteEngine(ModelParams(finest_level=-1, master_seed=4))
    rng = np.random.default_rng(5)
    tested = 0
    for _ in range(500):
        pts = [tuple(int(v) for v in rng.integers(-60, 61, 2)) for _ in range(4)]
        if pts[0] == pts[1] or pts[2] == pts[3]:
            continue
        res = check_compatibility(eng.route_units(pts[0], pts[1]), eng.route_units(pts[2], pts[3]))
        if res is not None:
            assert res
            tested += 1
    assert tested > 50


def test_continuum_identity_wrapper_matches_engine():
    eng = RouteEngine(ModelParams(finest_level=-2, master_seed=4))
    r = continuum_route((1.25, -3.5), (7.0, 2.75), InvarianceParams.identity(), eng)
    assert r.turns == eng.route((Fraction(5, 4), Fraction(-7, 2)), (7, Fraction(11, 4))).turns
    assert np.allclose(r.continuum_points()[0], (1.25, -3.5))
    with pytest.raises(PreconditionError):
        continuum_route((1.0, 1.0), (1.0, 1.0), InvarianceParams.identity(), eng)


def test_translation_depth_coupling():
    inv = InvarianceParams.from_seed(17, n=10)
    lo = inv.shift_units(-4)
    hi = inv.with_depth(11).shift_units(-4)
    mod = 1 << 14
    assert (hi[0] % mod, hi[1] % mod) == lo


def test_route_stable_under_deeper_translation():
    eng = RouteEngine(ModelParams(finest_level=-4, master_seed=4))
    inv = InvarianceParams.from_seed(23, n=12)
    r12 = continuum_route((0.3, 0.1), (2.2, 1.7), inv, eng)
    r13 = continuum_route((0.3, 0.1), (2.2, 1.7), inv.with_depth(13), eng)
    assert np.allclose(r12.continuum_points(), r13.continuum_points())


def test_route_length_at_least_sup_distance():
    eng = RouteEngine(ModelParams(finest_level=-3, master_seed=9))
    for seed in range(20):
        inv = InvarianceParams.from_seed(seed, n=8)
        r = continuum_route((0.0, 0.0), (1.0, 0.0), inv, eng)
        pts = r.continuum_points()
        assert r.continuum_length() >= np.linalg.norm(pts[-1] - pts[0]) - 1e-12
