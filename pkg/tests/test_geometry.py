import math

import numpy as np
import pytest

from sirsn.dyadic import ModelParams, ParameterError, PreconditionError
from sirsn.geometry import (MarginError, Subnetwork, Window, build_E, build_subnetwork, edge_intensity,
                            line_crossings, sample_poisson, segment_crossings, strip_endpoint_discs,
                            to_csv, to_svg)
from sirsn.routing import Frame, RouteEngine


@pytest.fixture(scope="module")
def engine():
    return RouteEngine(ModelParams(finest_level=0, master_seed=2))


def test_poisson_mean_count():
    w = Window(0, 0, 1, 1)
    counts = np.array([len(sample_poisson(1.0, w, s)) for s in range(10_000)])
    assert abs(counts.mean() - 1.0) < 4 * counts.std(ddof=1) / math.sqrt(len(counts))


def test_poisson_thinning_is_coupled():
    s = sample_poisson(4.0, Window.square(5), 3)
    t = s.thin(2.0)
    assert (t.times <= 2.0).all()
    assert len(t) == int((s.times <= 2.0).sum())
    assert {tuple(p) for p in t.points} <= {tuple(p) for p in s.points}
    with pytest.raises(ParameterError):
        s.thin(5.0)


def test_poisson_edge_cases():
    assert len(sample_poisson(3.0, Window(0, 0, 0, 5), 1)) == 0
    with pytest.raises(ParameterError):
        sample_poisson(0.0, Window.square(1), 0)
    with pytest.raises(ParameterError):
        Window(1, 0, 0, 1)


def test_two_point_network_is_the_route(engine):
    r = engine.route_units((3, 1), (-2, 5))
    net = build_subnetwork([(3, 1), (-2, 5)], engine)
    assert net.edge_count == r.length_units


def test_collinear_axis_points(engine):
    net = build_subnetwork([(0, -3), (0, 4), (0, 9)], engine)
    assert net.h == {} and net.v == {0: [[-3, 9]]}
    assert net.total_length() == 12


def test_union_contains_every_route(engine):
    rng = np.random.default_rng(1)
    pts = [tuple(int(v) for v in rng.integers(-20, 21, 2)) for _ in range(7)]
    cache = {}
    net = build_subnetwork(pts, engine, routes=cache)
    for r in cache.values():
        single = Subnetwork(engine.level)
        single.add_route(r)
        assert net.contains(single.normalize())


def test_needs_two_points(engine):
    with pytest.raises(PreconditionError):
        build_subnetwork([(1, 1)], engine)


def test_union_with_itself_is_idempotent(engine):
    net = build_subnetwork([(1, 2), (7, -3), (-4, 6)], engine)
    assert net.union(net).total_length() == net.total_length()


def test_coupled_inclusion_under_thinning():
    eng = RouteEngine(ModelParams(finest_level=-2, master_seed=5))
    fr = Frame(level=-2)
    s = sample_poisson(1.0, Window.square(4), 8)
    small = [fr.to_lattice(p) for p in s.thin(0.5).points]
    big = [fr.to_lattice(p) for p in s.points]
    assert build_subnetwork(big, eng).contains(build_subnetwork(small, eng))


def test_edge_intensity_examples():
    net = Subnetwork(0, window=Window(-5, -5, 5, 5))
    net.add_segment((0, 0), (1, 0))
    net.normalize()
    assert edge_intensity(net, Window(0, -0.5, 1, 0.5), margin=1) == pytest.approx(1.0)
    with pytest.raises(MarginError):
        edge_intensity(net, Window(-4.5, -1, 1, 1), margin=1)


def test_full_grid_intensity():
    h = 0.5
    net = Subnetwork(-1)
    for k in range(-20, 21):
        net.add_segment((k, -20), (k, 20))
        net.add_segment((-20, k), (20, k))
    net.normalize()
    assert edge_intensity(net, Window(-4.25, -4.25, 3.75, 3.75)) == pytest.approx(2 / h)


def test_axis_frame_crossing_angles_are_right_angles():
    net = Subnetwork(0)
    for x in range(-3, 4):
        net.add_segment((x, -10), (x, 10))
    net.normalize()
    cr = line_crossings(net, (-5.5, 0.25), (5.5, 0.25))
    assert len(cr) == 7
    assert all(c.angle == pytest.approx(math.pi / 2) for c in cr)


def test_crossing_angles_measured_in_open_half_turn():
    seg = np.array([[0.0, -1.0, 1.0, 1.0], [1.0, 1.0, 0.0, -1.0]])
    angles = sorted(c.angle for c in segment_crossings(seg, (-2, 0), (2, 0)))
    assert all(0 < a < math.pi for a in angles)
    assert angles[0] == pytest.approx(math.atan2(2, 1))


def test_strip_axis_route_keeps_central_portion():
    eng = RouteEngine(ModelParams(finest_level=-2, master_seed=1))
    r = eng.route((0, 0), (10, 0))
    kept = strip_endpoint_discs(r, 1.0)
    total = sum(abs(b[0] - a[0]) for a, b in kept) / 4
    assert total == pytest.approx(8.0)
    assert strip_endpoint_discs(r, 20.0) == []
    full = strip_endpoint_discs(r, 1e-6)
    assert sum(abs(b[0] - a[0]) for a, b in full) == r.length_units
    with pytest.raises(ParameterError):
        strip_endpoint_discs(r, 0.0)


def test_E_is_monotone_and_inside_S(engine):
    rng = np.random.default_rng(4)
    pts = [tuple(int(v) for v in rng.integers(-15, 16, 2)) for _ in range(6)]
    cache = {}
    S = build_subnetwork(pts, engine, routes=cache)
    fr = Frame(level=0)
    E1 = build_E(cache.values(), 1.0, 0, fr)
    E3 = build_E(cache.values(), 3.0, 0, fr)
    assert S.contains(E1) and E1.contains(E3)


def test_exports(engine):
    net = build_subnetwork([(1, 2), (7, -3)], engine)
    csv = to_csv(net)
    assert csv.splitlines()[0] == "x1,y1,x2,y2,height,mark"
    assert len(csv.splitlines()) > 1
    assert to_svg(net.continuum_segments()).startswith("<svg")
