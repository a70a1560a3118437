import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from oracles import brute_gabriel
from sirsn.alt_models import (LineNetwork, MarkedLine, UnreachableError, build_dynamic_gabriel,
                              gabriel_from_points, gabriel_scale_check, in_open_disc, line_uniqueness_probe,
                              min_time_route_gabriel, min_time_route_lines, sample_line_process,
                              truncated_power_cdf, truncated_power_quantile)
from sirsn.dyadic import ParameterError
from sirsn.geometry import Window


# -- marked line process ------------------------------------------------------

def test_line_count_proportional_to_perimeter():
    for win in (Window.square(1.0), Window(0, 0, 4, 1)):
        counts = np.array([len(sample_line_process(win, 1.0, 3.0, 1, 4, s)) for s in range(600)])
        per = 2 * (win.x1 - win.x0 + win.y1 - win.y0)
        assert abs(counts.mean() - per) < 4 * counts.std(ddof=1) / math.sqrt(len(counts))


def test_marks_follow_truncated_power_law():
    lines = sample_line_process(Window.square(50.0), 1.0, 2.5, 1.0, 10.0, 4)
    v = np.array([float(ln.speed) for ln in lines])
    assert len(v) > 200 and v.min() >= 1.0 and v.max() <= 10.0
    ks = stats.kstest(v, lambda x: truncated_power_cdf(x, 2.5, 1.0, 10.0))
    assert ks.pvalue > 1e-3


def test_quantile_inverts_cdf():
    u = np.linspace(0.01, 0.99, 25)
    assert np.allclose(truncated_power_cdf(truncated_power_quantile(u, 3.0, 0.5, 8.0), 3.0, 0.5, 8.0), u)


def test_equal_bounds_give_equal_marks():
    lines = sample_line_process(Window.square(3.0), 1.0, 3.0, 2.0, 2.0, 1)
    assert lines and {ln.speed for ln in lines} == {Fraction(2)}


@pytest.mark.parametrize("args", [(2.0, 1, 2), (3.0, 0, 2), (3.0, 3, 2)])
def test_line_process_parameter_errors(args):
    with pytest.raises(ParameterError):
        sample_line_process(Window.square(1.0), 1.0, *args, 0)


def _axis_lines(fast):
    # y = 0 (speed ``fast``), and x = -1, 0, 1 (speed 1)
    return [MarkedLine(math.pi / 2, 0.0, Fraction(fast))] + [MarkedLine(0.0, float(x), Fraction(1)) for x in (-1, 0, 1)]


def test_same_line_route_is_direct():
    net = LineNetwork(_axis_lines(10), Window.square(3.0))
    r = min_time_route_lines((-1.0, 0.0), (1.0, 0.0), net)
    assert np.allclose(r.points[:, 1], 0.0)
    assert float(r.time) == pytest.approx(0.2)
    assert r.snap_radius < 1e-12 and r.unique


def test_parallel_lines_have_no_vertices():
    net = LineNetwork([MarkedLine(0.0, x, Fraction(1)) for x in (-1.0, 1.0)], Window.square(3.0))
    with pytest.raises(UnreachableError):
        min_time_route_lines((0, 0), (1, 1), net)


@pytest.fixture(scope="module")
def line_net():
    win = Window.square(3.0)
    return LineNetwork(sample_line_process(win, 1.0, 3.0, 1.0, 8.0, 11), win)


def test_line_times_symmetric_and_triangle(line_net):
    rng = np.random.default_rng(0)
    n = len(line_net.points)
    for _ in range(40):
        a, b, c = (int(x) for x in rng.choice(n, 3, replace=False))
        tab, tba = line_net.time(a, b), line_net.time(b, a)
        assert isinstance(tab, Fraction) and tab == tba
        assert line_net.time(a, c) <= tab + line_net.time(b, c)


def test_adding_lines_never_slows_routes():
    win = Window.square(3.0)
    lines = sample_line_process(win, 1.0, 3.0, 1.0, 8.0, 21)
    extra = sample_line_process(win, 0.5, 3.0, 1.0, 8.0, 22)
    small, big = LineNetwork(lines, win), LineNetwork(lines + extra, win)
    rng = np.random.default_rng(1)
    pairs = list(small.vertex_index)
    for _ in range(30):
        (i, j), (k, l) = (pairs[int(x)] for x in rng.choice(len(pairs), 2, replace=False))
        s, t = small.vertex_of(i, j), small.vertex_of(k, l)
        bs, bt = big.vertex_of(i, j), big.vertex_of(k, l)
        assert np.allclose(small.points[s], big.points[bs])
        assert float(big.time(bs, bt)) <= float(small.time(s, t)) * (1 + 1e-9)


def test_uniqueness_probe_reports(line_net):
    out = line_uniqueness_probe(line_net, 30, 2)
    assert out["queries"] + out["unreachable"] == 30
    assert 0.0 <= out["tie_fraction"] <= 1.0


def test_exact_ties_detected():
    # unit square of equal-speed lines: two optimal paths between opposite corners
    lines = [MarkedLine(0.0, x, Fraction(1)) for x in (0.0, 1.0)] + \
            [MarkedLine(math.pi / 2, y, Fraction(1)) for y in (0.0, 1.0)]
    net = LineNetwork(lines, Window(-1, -1, 2, 2))
    r = net.route_vertices(net.vertex_of(0, 2), net.vertex_of(1, 3))
    assert r.n_optimal == 2 and not r.unique


# -- dynamic Gabriel graph ----------------------------------------------------

def test_in_open_disc_exact_on_boundary():
    assert not in_open_disc((0, 1), (-1, 0), (1, 0))
    assert in_open_disc((0, 0.999999), (-1, 0), (1, 0))
    assert not in_open_disc((0.6, 0.8), (-1, 0), (1, 0))


@pytest.mark.parametrize("seed, n", [(0, 500), (1, 200), (2, 60)])
def test_incremental_build_matches_brute_force(seed, n):
    pts = np.random.default_rng(seed).uniform(0, 10, (n, 2))
    assert gabriel_from_points(pts).edge_set() == brute_gabriel(pts)


def test_incremental_build_matches_brute_force_on_lattice():
    # integer lattice points put many candidates exactly on disc boundaries
    g = np.array([(x, y) for x in range(12) for y in range(12)], dtype=float)
    pts = g[np.random.default_rng(5).permutation(len(g))]
    assert gabriel_from_points(pts).edge_set() == brute_gabriel(pts)


def test_snapshot_is_graph_of_earlier_arrivals():
    g = build_dynamic_gabriel(3.0, 0.0, Window.square(3.0), 7)
    snap = g.snapshot(1.5)
    again = gabriel_from_points(snap.points)
    assert snap.edge_set() == again.edge_set()
    assert snap.edge_set() <= g.edge_set()


def test_gamma_zero_time_is_path_length_and_symmetric():
    g = build_dynamic_gabriel(2.0, 0.0, Window.square(3.0), 3)
    r = min_time_route_gabriel((-2.0, -2.0), (2.0, 2.0), g)
    seg = r.segments()
    assert r.time == pytest.approx(float(np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1]).sum()))
    back = min_time_route_gabriel((2.0, 2.0), (-2.0, -2.0), g)
    assert back.time == pytest.approx(r.time, rel=1e-12)


def test_speeds_frozen_at_creation():
    g = build_dynamic_gabriel(2.0, 0.5, Window.square(2.0), 4)
    e = np.asarray(g.edges)
    length = np.hypot(*(g.points[e[:, 1]] - g.points[e[:, 0]]).T)
    assert np.allclose(g.edge_times(), length * g.times[e[:, 1]] ** 0.5)
    with pytest.raises(ParameterError):
        build_dynamic_gabriel(2.0, 1.0, Window.square(2.0), 4)


def test_scale_check_statistics_agree():
    out = gabriel_scale_check(4.0, 2.0, 3.0, 6, 0)
    for k in range(2):
        d = out["base"]["mean"][k] - out["scaled"]["mean"][k]
        se = math.hypot(out["base"]["se"][k], out["scaled"]["se"][k])
        assert abs(d) <= 4 * se
