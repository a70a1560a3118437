import math
from fractions import Fraction

import numpy as np
import pytest

from sirsn.dyadic import ModelParams, ParameterError, PreconditionError
from sirsn.geometry import Window
from sirsn.stats import Replicate, WindowSpec
from sirsn.transit import (TransitNode, TransitNodeSet, access_square, audit_summary, build_transit_nodes,
                           cost_model, cost_total, exact_power, homogeneity, local_access_set,
                           route_grid_crossings, sandwich_report, transit_experiment)

H = 0.25


@pytest.fixture(scope="module")
def replicate():
    return Replicate(1.0, 0, ModelParams(finest_level=-4, master_seed=5), WindowSpec(1.5, 2.0), tag=11)


@pytest.fixture(scope="module")
def experiment(replicate):
    return transit_experiment(replicate, H, max_pairs=30)


def test_corner_tie_rule_at_grid_intersection():
    assert access_square((0.5, 0.75), H) == pytest.approx((0.0, 0.25, 0.75, 1.0))
    # just past the intersection the cell flips to the other side
    assert access_square((0.5 + 1e-9, 0.75 + 1e-9), H) == pytest.approx((0.25, 0.5, 1.0, 1.25))


def test_access_square_contains_z_with_margin_h():
    rng = np.random.default_rng(0)
    for z in rng.uniform(-3, 3, size=(2000, 2)):
        x0, y0, x1, y1 = access_square(z, H)
        assert x1 - x0 == pytest.approx(3 * H) and y1 - y0 == pytest.approx(3 * H)
        gap = min(z[0] - x0, x1 - z[0], z[1] - y0, y1 - z[1])
        assert gap >= H - 1e-12


def _grid_nodes(win, h, rng, n):
    """Synthetic node set: random points on the spacing-h grid lines."""
    nodes = {}
    for k in range(n):
        if rng.random() < 0.5:
            gi = int(rng.integers(math.ceil(win.x0 / h), math.floor(win.x1 / h) + 1))
            p, key = (gi * h, float(rng.uniform(win.y0, win.y1))), (0, gi, 0, 0, k)
        else:
            gi = int(rng.integers(math.ceil(win.y0 / h), math.floor(win.y1 / h) + 1))
            p, key = (float(rng.uniform(win.x0, win.x1)), gi * h), (1, gi, 0, 0, k)
        nodes[key] = TransitNode(key, p, (0, 0))
    return TransitNodeSet(h, 1.0, win, nodes)


def test_sandwich_guaranteed_bound_on_synthetic_nodes():
    rng = np.random.default_rng(3)
    win = Window.square(2.0)
    ns = _grid_nodes(win, H, rng, 4000)
    total = {"n": 0, "below_h": 0, "above_upper": 0}
    for z in rng.uniform(-1.4, 1.4, size=(300, 2)):
        acc = local_access_set(tuple(z), ns)
        rep = sandwich_report(acc, H)
        for k in total:
            total[k] += rep[k]
        x0, y0, x1, y1 = acc.square
        for n in acc.nodes:
            on_x = min(abs(n.point[0] - x0), abs(n.point[0] - x1)) < 1e-9
            on_y = min(abs(n.point[1] - y0), abs(n.point[1] - y1)) < 1e-9
            assert on_x or on_y
    assert total["n"] > 0 and total["below_h"] == 0 and total["above_upper"] == 0


def test_margin_violation_raises():
    ns = TransitNodeSet(H, 1.0, Window.square(1.0))
    with pytest.raises(PreconditionError):
        local_access_set((0.9, 0.0), ns)
    assert local_access_set((0.0, 0.0), ns).nodes == []


def test_empty_network_gives_empty_node_set():
    params = ModelParams(finest_level=-2)
    R = next(R for R in (Replicate(1.0, k, params, WindowSpec(0.1, 0.1)) for k in range(50))
             if len(R.points) <= 1)
    assert len(build_transit_nodes(R, 1.0)) == 0
    with pytest.raises(ParameterError):
        build_transit_nodes(R, 0.0)


def test_nodes_lie_on_grid_and_route_edges(replicate, experiment):
    nodes = experiment["nodes"]
    assert len(nodes) > 0
    for key, n in list(nodes.nodes.items())[:300]:
        gaxis, gi = key[0], key[1]
        assert n.point[gaxis] == pytest.approx(gi * H, abs=1e-9)


def test_route_grid_crossings_positions(replicate):
    r = replicate.route(0, 1)
    L = r.length_units
    for key, point, rep, s in route_grid_crossings(r, H):
        assert 0 < s < L
        assert point[key[0]] == pytest.approx(key[1] * H, abs=1e-9)


def test_access_distances_never_below_h(experiment):
    sand = experiment["sandwich"]
    assert sand["n"] > 0
    assert sand["below_h"] == 0 and sand["above_upper"] == 0


def test_well_separated_audits_match(experiment):
    s = audit_summary(experiment["audits"], H)
    assert s["pairs"] > 0
    assert s["well_separated_mismatches"] == 0
    assert s["not_through_access"] == 0


def test_cost_model_closed_form():
    rep = cost_model(1000.0, 1.0, 1e-3, 2.0, eta=2.0, K_search=1.5)
    assert rep.m_crit == pytest.approx(1000.0)
    assert rep.c1 * rep.m_crit == pytest.approx(rep.c2 * rep.m_crit ** 2)
    assert cost_total(rep.r_star, rep) == pytest.approx(rep.optimal_cost)
    for f in (0.9, 1.1):
        assert cost_total(rep.r_star * f, rep) > rep.optimal_cost
    assert rep.optimal_cost == pytest.approx(rep.cost_constant * rep.A ** (2 / 3) * rep.eta ** (2 / 3))
    plain = cost_model(1000.0, 1.0, 1e-3, 2.0)
    assert plain.node_count == pytest.approx(plain.node_constant * plain.M ** (1 / 3))
    with pytest.raises(ParameterError):
        cost_model(0.0, 1.0, 1.0, 1.0)


def test_cost_model_homogeneity():
    assert homogeneity(8) == {"cost_ratio": Fraction(4), "node_ratio": Fraction(2)}
    a, b = cost_model(1000.0, 1.0, 1e-3, 2.0), cost_model(8000.0, 1.0, 1e-3, 2.0)
    assert b.optimal_cost / a.optimal_cost == pytest.approx(4.0)
    assert b.node_count / a.node_count == pytest.approx(2.0)
    assert exact_power(Fraction(2), 1, 2) is None
    assert exact_power(Fraction(27, 8), 2, 3) == Fraction(9, 4)


def test_three_halves_lower_bound_is_not_guaranteed():
    # z = (0.3, 0.3) sits in the cell [0.25, 0.5]^2, so S_z = [0, 0.75]^2 and the
    # boundary point (0, 0.3) is only 0.3 < 1.5 h away
    node = TransitNode((0, 0, 0, 0, 0), (0.0, 0.3), (0, 0))
    ns = TransitNodeSet(H, 1.0, Window.square(2.0), {node.key: node})
    acc = local_access_set((0.3, 0.3), ns)
    rep = sandwich_report(acc, H)
    assert rep == {"n": 1, "below_three_halves": 1, "below_h": 0, "above_upper": 0}
