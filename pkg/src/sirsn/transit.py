"""Transit nodes on the major-road network and the two-phase routing experiment.

Transit nodes are the points where routes of a replicate cross the square
grid of spacing ``h`` (continuum frame) at distance at least ``h`` from
both route endpoints.  Membership is tested exactly per crossing point, so
a node is identified by the lattice unit edge it lies on and the grid line
it crosses; routes through the same edge produce the same node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .dyadic import ParameterError, PreconditionError
from .geometry import Window
from .routing import Route, compress_turns
from .stats import Replicate


@dataclass(frozen=True)
class TransitNode:
    key: tuple           # (grid axis, grid index, lattice axis, lattice line, unit index)
    point: tuple         # continuum position
    rep: tuple           # nearest lattice vertex of the unit edge, integer units


@dataclass
class TransitNodeSet:
    h: float
    lam: float
    window: Window
    nodes: dict = field(default_factory=dict)   # key -> TransitNode

    def __len__(self):
        return len(self.nodes)

    def in_window(self, win: Window) -> list:
        """Nodes in the half-open window [x0, x1) x [y0, y1).

        Half-open counting keeps grid lines on the window edges from being
        counted twice when windows tile the plane.
        """
        return [n for n in self.nodes.values()
                if win.x0 <= n.point[0] < win.x1 and win.y0 <= n.point[1] < win.y1]

    def positions(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, 2))
        return np.array([n.point for n in self.nodes.values()])


@dataclass
class LocalAccessSet:
    z: tuple
    square: tuple                # (x0, y0, x1, y1) of S_z
    nodes: list
    distances: list


def route_grid_crossings(route: Route, h: float):
    """Crossings of a route with the spacing-``h`` grid, with their node keys.

    Yields ``(key, point, rep, s)`` where ``s`` is the arc-length position
    of the crossing in lattice units.
    """
    fr = route.frame
    turns = route.turns
    pts = fr.to_continuum(turns)
    s = 0
    for k in range(len(turns) - 1):
        a, b = turns[k], turns[k + 1]
        pa, pb = pts[k], pts[k + 1]
        horiz = a[1] == b[1]
        lat_axis, line = (0, a[1]) if horiz else (1, a[0])
        u0, u1 = (a[0], b[0]) if horiz else (a[1], b[1])
        L = abs(u1 - u0)
        for gaxis in (0, 1):
            lo, hi = sorted((pa[gaxis], pb[gaxis]))
            if hi - lo <= 0:
                continue
            for gi in range(math.ceil(lo / h), math.floor(hi / h) + 1):
                g = gi * h
                t = (g - pa[gaxis]) / (pb[gaxis] - pa[gaxis])
                if not 0.0 < t < 1.0:
                    continue
                pos = u0 + t * (u1 - u0)        # lattice coordinate along the line
                cell = math.floor(pos)
                if cell == pos:                 # crossing exactly at a lattice vertex
                    cell = int(pos) - (1 if u1 < u0 else 0)
                frac = pos - cell
                rep_u = cell if frac <= 0.5 else cell + 1
                rep = (rep_u, line) if horiz else (line, rep_u)
                point = (float(pa[0] + t * (pb[0] - pa[0])), float(pa[1] + t * (pb[1] - pa[1])))
                yield (gaxis, gi, lat_axis, line, cell), point, rep, s + t * L
        s += L


def build_transit_nodes(R: Replicate, h: float) -> TransitNodeSet:
    """Grid crossings of all pairwise routes lying at distance >= h from both endpoints."""
    if not h > 0:
        raise ParameterError("h must be positive")
    out = TransitNodeSet(h, R.lam, R.sample_window)
    n = len(R.points)
    for j in range(n):
        for i in range(j):
            _add_route_nodes(out, R.route(i, j), R.points_c[i], R.points_c[j], R, i, j)
    return out


def _add_route_nodes(out: TransitNodeSet, route: Route, ci, cj, R: Replicate, i: int, j: int):
    h = out.h
    start = np.asarray(route.frame.to_continuum([route.turns[0]])[0])
    end = np.asarray(route.frame.to_continuum([route.turns[-1]])[0])
    for key, point, rep, _ in route_grid_crossings(route, h):
        p = np.asarray(point)
        if np.hypot(*(p - start)) >= h and np.hypot(*(p - end)) >= h:
            if key not in out.nodes:
                out.nodes[key] = TransitNode(key, point, rep)


def node_intensity(R: Replicate, nodes: TransitNodeSet) -> float:
    win = R.measure_window
    return len(nodes.in_window(win)) / win.area


def access_square(z, h: float) -> tuple:
    """S_z: the 3h square concentric with the grid cell that contains z and has the nearest
    grid intersection as a corner (ties towards smaller coordinates)."""
    x, y = float(z[0]), float(z[1])
    i = _nearest_index(x / h)
    j = _nearest_index(y / h)
    cx0 = (i - 1) * h if x <= i * h else i * h
    cy0 = (j - 1) * h if y <= j * h else j * h
    return cx0 - h, cy0 - h, cx0 + 2 * h, cy0 + 2 * h


def _nearest_index(u: float) -> int:
    f = math.floor(u)
    return f if u - f <= 0.5 else f + 1


def local_access_set(z, nodes: TransitNodeSet, margin_window: Optional[Window] = None) -> LocalAccessSet:
    """Transit nodes on the boundary of S_z."""
    h = nodes.h
    win = margin_window or nodes.window
    if not (win.x0 + 2 * h <= z[0] <= win.x1 - 2 * h and win.y0 + 2 * h <= z[1] <= win.y1 - 2 * h):
        raise PreconditionError("query point violates the 2h margin")
    x0, y0, x1, y1 = access_square(z, h)
    i0, i1 = round(x0 / h), round(x1 / h)
    j0, j1 = round(y0 / h), round(y1 / h)
    sel = []
    for nd in nodes.nodes.values():
        gaxis, gi = nd.key[0], nd.key[1]
        px, py = nd.point
        if gaxis == 0 and gi in (i0, i1) and y0 <= py <= y1:
            sel.append(nd)
        elif gaxis == 1 and gi in (j0, j1) and x0 <= px <= x1:
            sel.append(nd)
    dist = [math.hypot(nd.point[0] - z[0], nd.point[1] - z[1]) for nd in sel]
    return LocalAccessSet(tuple(map(float, z)), (x0, y0, x1, y1), sel, dist)


def sandwich_report(access: LocalAccessSet, h: float) -> dict:
    """Counts of access nodes outside the stated and the guaranteed distance bounds."""
    d = np.asarray(access.distances)
    return {
        "n": int(len(d)),
        "below_three_halves": int(np.sum(d <= 1.5 * h)),
        "below_h": int(np.sum(d < h * (1 - 1e-12))),
        "above_upper": int(np.sum(d > 2 ** 1.5 * h * (1 + 1e-12))),
    }


# ---------------------------------------------------------------------------
# two-phase routing


@dataclass
class TwoPhaseAudit:
    z1: tuple
    z2: tuple
    passes_both: bool
    match: bool
    direct_states: int
    local_states: int
    n_access: tuple
    sep_inf: float = 0.0
    detail: str = ""

    def well_separated(self, h: float) -> bool:
        """True when the two access squares are disjoint (sup-distance above 5h)."""
        return self.sep_inf > 5 * h


class TwoPhaseRouter:
    """Local legs to access nodes plus a cached node-to-node table."""

    def __init__(self, R: Replicate, nodes: TransitNodeSet):
        self.R, self.nodes = R, nodes
        self.engine = R.engine
        self.gamma = R.params.gamma
        self._table: dict = {}

    def _leg(self, a, b) -> Optional[Route]:
        if a == b:
            return None
        return self.engine.route_units(a, b)

    def table(self, a, b):
        key = (a, b) if a <= b else (b, a)
        r = self._table.get(key)
        if r is None and a != b:
            r = self.engine.route_units(*key)
            self._table[key] = r
        if r is None:
            return None
        return r if r.turns[0] == a else r.reversed()

    def route(self, i: int, j: int) -> tuple[tuple, TwoPhaseAudit]:
        """Two-phase route between two points of the replicate (an in-model pair)."""
        R = self.R
        direct = R.route(i, j)
        if direct.turns[0] != R.points[i]:
            direct = direct.reversed()
        return self._audit(R.points[i], R.points[j], R.points_c[i], R.points_c[j], direct)

    def route_points(self, c1, c2) -> tuple[tuple, TwoPhaseAudit]:
        """Two-phase route between arbitrary continuum points, snapped to the lattice."""
        fr = self.R.frame
        z1, z2 = fr.to_lattice(c1), fr.to_lattice(c2)
        c1, c2 = (np.asarray(fr.to_continuum([z])[0], dtype=float) for z in (z1, z2))
        return self._audit(z1, z2, c1, c2, self.engine.route_units(z1, z2))

    def _audit(self, z1, z2, c1, c2, direct: Route) -> tuple[tuple, TwoPhaseAudit]:
        h = self.nodes.h
        c1, c2 = np.asarray(c1, dtype=float), np.asarray(c2, dtype=float)
        if math.hypot(*(c2 - c1)) <= 3 * h:
            raise PreconditionError("endpoints closer than 3h")
        A1 = local_access_set(tuple(c1), self.nodes)
        A2 = local_access_set(tuple(c2), self.nodes)
        edges = _edge_keys(direct.turns)
        passes = any(_node_edge(n) in edges for n in A1.nodes) and any(_node_edge(n) in edges for n in A2.nodes)
        legs1 = {n.rep: self._leg(z1, n.rep) for n in A1.nodes}
        legs2 = {n.rep: self._leg(n.rep, z2) for n in A2.nodes}
        local_states = sum(r.states for r in legs1.values() if r is not None) + \
            sum(r.states for r in legs2.values() if r is not None)
        best = None
        for t1, r1 in legs1.items():
            for t2, r2 in legs2.items():
                mid = self.table(t1, t2)
                parts = [r for r in (r1, mid, r2) if r is not None]
                cost = sum((p.cost.evaluate(self.gamma) for p in parts), Fraction(0))
                weight = sum(p.secondary_weight for p in parts)
                cand = (cost, weight, parts)
                if best is None or cand[:2] < best[:2]:
                    best = cand
        turns = _concat([p.turns for p in best[2]]) if best else None
        match = best is not None and turns == direct.turns and best[0] == direct.cost.evaluate(self.gamma)
        audit = TwoPhaseAudit(tuple(map(float, c1)), tuple(map(float, c2)), passes, match,
                              direct.states, local_states, (len(A1.nodes), len(A2.nodes)),
                              float(np.max(np.abs(c2 - c1))))
        if not match:
            audit.detail = "no combination" if best is None else "differs from direct route"
        return turns, audit


def _edge_keys(turns) -> set:
    out = set()
    for a, b in zip(turns[:-1], turns[1:]):
        if a[1] == b[1]:
            for u in range(min(a[0], b[0]), max(a[0], b[0])):
                out.add((0, a[1], u))
        else:
            for u in range(min(a[1], b[1]), max(a[1], b[1])):
                out.add((1, a[0], u))
    return out


def _node_edge(n: TransitNode):
    return n.key[2], n.key[3], n.key[4]


def _concat(parts) -> tuple:
    pts = list(parts[0])
    for p in parts[1:]:
        if tuple(p[0]) != tuple(pts[-1]):
            raise ValueError("legs do not join")
        pts.extend(p[1:])
    return compress_turns([tuple(q) for q in pts])


def transit_experiment(R: Replicate, h: float, max_pairs: int = 200, n_queries: int = 32, seed: int = 0) -> dict:
    """Node intensity, access-set sizes, sandwich counts and the in-model two-phase audit.

    Access-set sizes are measured at uniform query points of the measurement
    window (the stationary mean) and, separately, at the replicate's own
    points (a Palm mean, inflated by the routes leaving each point).
    """
    nodes = build_transit_nodes(R, h)
    win = R.measure_window
    rng = np.random.default_rng(seed)
    queries = np.column_stack([rng.uniform(win.x0, win.x1, n_queries), rng.uniform(win.y0, win.y1, n_queries)])
    inside = [k for k in range(len(R.points))
              if win.x0 <= R.points_c[k][0] < win.x1 and win.y0 <= R.points_c[k][1] < win.y1]
    sand = {"n": 0, "below_three_halves": 0, "below_h": 0, "above_upper": 0}

    def sizes_at(points, tally):
        out = []
        for z in points:
            try:
                acc = local_access_set(tuple(z), nodes)
            except PreconditionError:
                continue
            out.append(len(acc.nodes))
            if tally:
                for key, v in sandwich_report(acc, h).items():
                    sand[key] += v
        return out

    sizes = sizes_at(queries, True)
    palm_sizes = sizes_at([R.points_c[k] for k in inside], False)
    router = TwoPhaseRouter(R, nodes)
    pairs = [(a, b) for ai, a in enumerate(inside) for b in inside[ai + 1:]
             if math.hypot(*(R.points_c[a] - R.points_c[b])) > 3 * h]
    if len(pairs) > max_pairs:
        pairs = [pairs[k] for k in sorted(rng.choice(len(pairs), size=max_pairs, replace=False))]
    audits = []
    for a, b in pairs:
        try:
            _, aud = router.route(a, b)
        except PreconditionError:
            continue
        audits.append(aud)
    return {
        "nodes": nodes,
        "node_count_in_window": len(nodes.in_window(win)),
        "window_area": win.area,
        "access_sizes": sizes,
        "palm_access_sizes": palm_sizes,
        "sandwich": sand,
        "audits": audits,
    }


def audit_summary(audits: list, h: float) -> dict:
    """Mismatch counts split by whether the access squares are disjoint."""
    well = [a for a in audits if a.well_separated(h)]
    near = [a for a in audits if not a.well_separated(h)]

    def ratio(xs):
        return float(np.mean([a.local_states / a.direct_states for a in xs])) if xs else float("nan")

    return {
        "pairs": len(audits),
        "mismatches": sum(not a.match for a in audits),
        "not_through_access": sum(not a.passes_both for a in audits),
        "well_separated_pairs": len(well),
        "well_separated_mismatches": sum(not a.match for a in well),
        "near_pairs": len(near),
        "near_mismatches": sum(not a.match for a in near),
        "state_ratio_well_separated": ratio(well),
        "state_ratio_near": ratio(near),
    }


def out_of_sample_audit(R: Replicate, nodes: TransitNodeSet, n_pairs: int, seed: int = 0) -> list:
    """Audits between uniform query points of the measurement window, which are not points of Xi."""
    win = R.measure_window
    h = nodes.h
    rng = np.random.default_rng(seed)
    router = TwoPhaseRouter(R, nodes)
    out, tries = [], 0
    while len(out) < n_pairs and tries < 50 * n_pairs:
        tries += 1
        c = np.column_stack([rng.uniform(win.x0, win.x1, 2), rng.uniform(win.y0, win.y1, 2)])
        if math.hypot(*(c[1] - c[0])) <= 3 * h:
            continue
        try:
            out.append(router.route_points(c[0], c[1])[1])
        except PreconditionError:
            continue
    return out


def out_of_sample_ladder(params, lams, h: float, half: float = 1.5, margin: float = 2.0,
                         n_reps: int = 2, n_pairs: int = 20, seed: int = 0) -> dict:
    """Out-of-sample mismatch rate at each lambda, for a fixed continuum window of half-side ``half``."""
    from .stats import WindowSpec
    rows = {}
    for lam in lams:
        spec = WindowSpec(half * math.sqrt(lam), margin)
        audits = []
        for rep in range(n_reps):
            R = Replicate(lam, rep, params, spec, tag=7)
            nodes = build_transit_nodes(R, h)
            audits += out_of_sample_audit(R, nodes, n_pairs, seed + rep)
        rows[lam] = audit_summary(audits, h)
    return rows


# ---------------------------------------------------------------------------
# cost model


@dataclass(frozen=True)
class CostModelReport:
    M: float
    eta: float
    A: float
    p1: float
    c1: float
    c2: float
    K_search: float
    m_crit: float
    r_star: float
    optimal_cost: float
    node_count: float
    cost_constant: float   # optimal_cost = cost_constant * M ** (2/3)
    node_constant: float   # node_count = node_constant * M ** (1/3)


def cost_model(M: float, c1: float, c2: float, p1: float, eta: float = 1.0, K_search: float = 1.0) -> CostModelReport:
    """Minimise c1 * eta * r^2 * p1 * K + c2 * (p1 * A / r^2)^2 over r, with A = M / eta.

    With a = c1 eta p1 K and b = c2 p1^2 A^2 the optimum is r*^6 = 2 b / a,
    cost* = 3 * 2^(-2/3) * a^(2/3) * b^(1/3) and node count p1 A / r*^2.
    """
    for v in (M, c1, c2, p1, eta, K_search):
        if not v > 0:
            raise ParameterError("cost-model inputs must be positive")
    A = M / eta
    a = c1 * eta * p1 * K_search
    b = c2 * (p1 * A) ** 2
    r_star = (2.0 * b / a) ** (1.0 / 6.0)
    cost = 3.0 * 2.0 ** (-2.0 / 3.0) * a ** (2.0 / 3.0) * b ** (1.0 / 3.0)
    nodes = p1 * A / r_star ** 2
    m_crit = c1 / c2
    cost_const = 3.0 * 2.0 ** (-2.0 / 3.0) * c1 ** (2 / 3) * c2 ** (1 / 3) * K_search ** (2 / 3) * p1 ** (4 / 3)
    node_const = (m_crit * K_search / 2.0) ** (1.0 / 3.0) * p1 ** (2.0 / 3.0)
    return CostModelReport(M, eta, A, p1, c1, c2, K_search, m_crit, r_star, cost, nodes, cost_const, node_const)


def cost_total(r: float, rep: CostModelReport) -> float:
    return rep.c1 * rep.eta * r * r * rep.p1 * rep.K_search + rep.c2 * (rep.p1 * rep.A / (r * r)) ** 2


def exact_power(x: Fraction, num: int, den: int) -> Optional[Fraction]:
    """x ** (num / den) when it is rational, else None."""
    x = Fraction(x) ** num
    out = []
    for part in (x.numerator, x.denominator):
        r = round(part ** (1.0 / den))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** den == part:
                out.append(c)
                break
        else:
            return None
    return Fraction(out[0], out[1])


def homogeneity(factor) -> dict:
    """Exact cost and node-count ratios when M is multiplied by ``factor`` (others fixed)."""
    f = Fraction(factor)
    return {"cost_ratio": exact_power(f, 2, 3), "node_ratio": exact_power(f, 1, 3)}


def transit_suite(params, lam: float = 1.0, h: float = 0.25, n_reps: int = 20, half: float = 1.5,
                  margin: float = 2.0, max_pairs: int = 80, tag: int = 11) -> dict:
    """Sandwich counts, two-phase audit, node intensity and |T_z| checks over replicates.

    The intensity and |T_z| comparisons use paired per-replicate differences
    against the formulas evaluated with that replicate's own p(lam, h), so
    ``h * p(lam, h)`` plays the role of p(1).
    """
    from .geometry import length_in_window
    from .stats import WindowSpec
    spec = WindowSpec(half, margin)
    sand = {"n": 0, "below_three_halves": 0, "below_h": 0, "above_upper": 0}
    audits, d_int, d_tz, pvals, ints, tzs = [], [], [], [], [], []
    for rep in range(n_reps):
        R = Replicate(lam, rep, params, spec, tag=tag)
        ex = transit_experiment(R, h, max_pairs=max_pairs, seed=rep)
        win = R.measure_window
        p_h = length_in_window(R.E(h), win) / win.area
        inten = ex["node_count_in_window"] / ex["window_area"]
        tz = float(np.mean(ex["access_sizes"])) if ex["access_sizes"] else float("nan")
        pvals.append(h * p_h)
        ints.append(inten)
        tzs.append(tz)
        d_int.append(inten - 4.0 / math.pi * h ** -2 * (h * p_h))
        d_tz.append(tz - 24.0 / math.pi * (h * p_h))
        for k, v in ex["sandwich"].items():
            sand[k] += v
        audits += ex["audits"]

    def mean_se(x):
        x = np.asarray(x, dtype=float)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")

    di, di_se = mean_se(d_int)
    dt, dt_se = mean_se(d_tz)
    p1, p1_se = mean_se(pvals)
    c1 = cost_model(1000.0, 1.0, 1e-3, 2.0)
    c8 = cost_model(8000.0, 1.0, 1e-3, 2.0)
    hom = homogeneity(8)
    return {
        "config": {"lambda": lam, "h": h, "n_reps": n_reps, "half": half, "margin": margin, "tag": tag},
        "p1_hat": p1, "p1_se": p1_se,
        "sandwich": sand,
        "sandwich_stated_ok": sand["below_three_halves"] == 0 and sand["above_upper"] == 0,
        "sandwich_guaranteed_ok": sand["below_h"] == 0 and sand["above_upper"] == 0,
        "audit": audit_summary(audits, h),
        "intensity": {"value": mean_se(ints)[0], "diff": di, "se": di_se, "pass": abs(di) <= 3 * di_se},
        "access_size": {"value": mean_se(tzs)[0], "diff": dt, "se": dt_se, "pass": abs(dt) <= 3 * dt_se},
        "cost_model": {
            "cost_ratio_float": c8.optimal_cost / c1.optimal_cost,
            "node_ratio_float": c8.node_count / c1.node_count,
            "cost_ratio_exact": str(hom["cost_ratio"]), "node_ratio_exact": str(hom["node_ratio"]),
            "pass": hom["cost_ratio"] == 4 and hom["node_ratio"] == 2,
        },
    }
