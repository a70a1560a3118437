"""Property checks of the structural lemmas on computed routes.

All checks work in the lattice frame with integer coordinates (units of
``2**level``).  Each returns a boolean or a :class:`LemmaReport` that keeps
the first failing witness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dyadic import (
    INFINITE,
    ModelParams,
    ParameterError,
    ResourceLimitError,
    dedupe_consecutive,
    is_admissable,
    parse_gamma,
    peak,
    unit_height,
)
from .routing import Route, RouteEngine, compress_turns, scale_route_by_two
from .weights import hash_u64


@dataclass
class LemmaReport:
    lemma: str
    trials: int = 0
    failures: int = 0
    witness: Optional[dict] = None
    constants: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def record(self, passed: bool, witness=None):
        self.trials += 1
        if not passed:
            self.failures += 1
            if self.witness is None and witness is not None:
                self.witness = witness

    def as_dict(self) -> dict:
        return {"lemma": self.lemma, "trials": self.trials, "failures": self.failures, "ok": self.ok,
                "witness": self.witness, "constants": self.constants, "details": self.details}


# ---------------------------------------------------------------------------
# polyline helpers


def _on_line_components(turns, axis: int, c: int) -> int:
    """Number of connected components of the route's intersection with the line coord[axis] == c."""
    comps = []  # list of [s0, s1] arc-length intervals
    s = 0
    for a, b in zip(turns[:-1], turns[1:]):
        L = abs(b[0] - a[0]) + abs(b[1] - a[1])
        if a[axis] == c and b[axis] == c:
            comps.append([s, s + L])
        elif min(a[axis], b[axis]) <= c <= max(a[axis], b[axis]):
            t = abs(c - a[axis])
            comps.append([s + t, s + t])
        s += L
    comps.sort()
    merged = []
    for iv in comps:
        if merged and iv[0] <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], iv[1])
        else:
            merged.append(list(iv))
    return len(merged)


def _contains_point(turns, p) -> bool:
    for a, b in zip(turns[:-1], turns[1:]):
        if min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]):
            return True
    return len(turns) == 1 and tuple(turns[0]) == tuple(p)


def check_peak(route: Route) -> bool:
    """The route visits z* and meets both peak lines in a single point or segment.

    z* is the pair of peaks of the coordinate ranges visited by the route.
    """
    t = route.turns
    xs = peak(min(p[0] for p in t), max(p[0] for p in t))
    ys = peak(min(p[1] for p in t), max(p[1] for p in t))
    if not _contains_point(t, (xs, ys)):
        return False
    return _on_line_components(t, 0, xs) == 1 and _on_line_components(t, 1, ys) == 1


def _with_peak_vertex(turns) -> list:
    """Turning points with z* inserted as a vertex (splitting the segment that contains it)."""
    t = [tuple(p) for p in turns]
    xs = peak(min(p[0] for p in t), max(p[0] for p in t))
    ys = peak(min(p[1] for p in t), max(p[1] for p in t))
    z = (xs, ys)
    if z in t:
        return t
    s = _locate(t, z)
    if s is None:
        return t
    arc = _arc_points(t)
    k = max(i for i, a in enumerate(arc) if a < s)
    return t[:k + 1] + [z] + t[k + 1:]


def check_admissable(route: Route) -> bool:
    """The x-values and y-values of the segment ends form admissable sequences.

    The route is split at z* (the peaks of its visited coordinate ranges),
    so z* counts as a segment end even when it lies inside a straight run.
    """
    return check_polyline_admissable(route.turns)


def check_polyline_admissable(turns: Sequence) -> bool:
    """Same as :func:`check_admissable` for a bare polyline (list of integer points)."""
    t = _with_peak_vertex(turns)
    xs = dedupe_consecutive(p[0] for p in t)
    ys = dedupe_consecutive(p[1] for p in t)
    return is_admissable(xs) and is_admissable(ys)


def _arc_points(turns):
    """Cumulative arc length at each turn point."""
    s = [0]
    for a, b in zip(turns[:-1], turns[1:]):
        s.append(s[-1] + abs(b[0] - a[0]) + abs(b[1] - a[1]))
    return s


def _locate(turns, p):
    """Arc-length parameter of lattice point p on the polyline, or None."""
    s = 0
    for a, b in zip(turns[:-1], turns[1:]):
        if min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]):
            return s + abs(p[0] - a[0]) + abs(p[1] - a[1])
        s += abs(b[0] - a[0]) + abs(b[1] - a[1])
    return None


def _point_at(turns, s):
    acc = 0
    for a, b in zip(turns[:-1], turns[1:]):
        L = abs(b[0] - a[0]) + abs(b[1] - a[1])
        if s <= acc + L:
            t = s - acc
            dx = (b[0] > a[0]) - (b[0] < a[0])
            dy = (b[1] > a[1]) - (b[1] < a[1])
            return a[0] + dx * t, a[1] + dy * t
        acc += L
    return tuple(turns[-1])


def sub_polyline(turns, s0, s1) -> tuple:
    """Compressed polyline between arc-length parameters s0 <= s1."""
    arc = _arc_points(turns)
    pts = [_point_at(turns, s0)] + [tuple(p) for p, s in zip(turns, arc) if s0 < s < s1] + [_point_at(turns, s1)]
    return compress_turns(pts)


def _common_points(t1, t2):
    """Lattice points shared by two axis-parallel polylines (overlaps contribute their ends)."""
    out = set()
    for a, b in zip(t1[:-1], t1[1:]):
        for c, d in zip(t2[:-1], t2[1:]):
            xlo, xhi = max(min(a[0], b[0]), min(c[0], d[0])), min(max(a[0], b[0]), max(c[0], d[0]))
            ylo, yhi = max(min(a[1], b[1]), min(c[1], d[1])), min(max(a[1], b[1]), max(c[1], d[1]))
            if xlo <= xhi and ylo <= yhi:
                out.add((xlo, ylo))
                out.add((xhi, yhi))
    return out


def check_compatibility(r1: Route, r2: Route) -> Optional[bool]:
    """Two routes coincide between their extreme meeting points.

    Returns None when the routes share fewer than two points.
    """
    t1, t2 = r1.turns, r2.turns
    common = _common_points(t1, t2)
    if len(common) < 2:
        return None
    params = sorted((_locate(t1, p), p) for p in common)
    (s0, u), (s1, v) = params[0], params[-1]
    a = sub_polyline(t1, s0, s1)
    su, sv = _locate(t2, u), _locate(t2, v)
    b = sub_polyline(t2, min(su, sv), max(su, sv))
    if su > sv:
        b = tuple(reversed(b))
    return a == b


def check_subroute(engine: RouteEngine, route: Route, s0: int, s1: int) -> bool:
    """The route between two of its lattice points is the route between them."""
    t = route.turns
    u, v = _point_at(t, s0), _point_at(t, s1)
    if u == v:
        return True
    sub = sub_polyline(t, min(s0, s1), max(s0, s1))
    r = engine.route_units(u, v)
    return r.turns == sub or r.turns == tuple(reversed(sub))


def check_sigma2(engine: RouteEngine, a, b) -> bool:
    """Route(2a, 2b) on the doubled engine equals the doubled route, as lattice point sets."""
    r = engine.route_units(a, b)
    d = engine.doubled().route_units(a, b)
    return scale_route_by_two(r).same_points(d) and d.cost == r.cost.scaled_by_two()


# ---------------------------------------------------------------------------
# lemma suite


def _rand_point(rng, lo, hi):
    return int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1))


def lemma_suite(params: ModelParams, n_pairs: int = 1000, extent: int = 1 << 10,
                coarse_level: int = 0, n_subroutes: int = 1) -> dict:
    """Peak, admissability, compatibility, doubling and multiresolution checks.

    Pairs have integer continuum coordinates in ``[-extent, extent]^2``;
    routes are computed on the ``params.finest_level`` lattice, and the
    multiresolution check recomputes them on the ``coarse_level`` lattice.
    """
    engine = RouteEngine(params)
    coarse = engine.at_level(coarse_level)
    rng = np.random.default_rng(hash_u64(params.master_seed, 5150))
    f = 1 << -engine.level if engine.level <= 0 else None
    if f is None:
        raise ParameterError("lemma suite expects finest_level <= 0")
    reps = {k: LemmaReport(k) for k in ("peak", "admissable", "compatibility", "sigma2", "multiresolution")}
    ties = 0
    prev = None
    for _ in range(n_pairs):
        z1 = _rand_point(rng, -extent, extent)
        z2 = _rand_point(rng, -extent, extent)
        while z2 == z1:
            z2 = _rand_point(rng, -extent, extent)
        a, b = (z1[0] * f, z1[1] * f), (z2[0] * f, z2[1] * f)
        r = engine.route_units(a, b)
        ties += r.tie_count > 1
        w = {"z1": z1, "z2": z2, "route": r.as_dict()}
        reps["peak"].record(check_peak(r), w)
        reps["admissable"].record(check_admissable(r), w)
        for _ in range(n_subroutes):
            L = r.length_units
            s0, s1 = sorted(int(v) for v in rng.integers(0, L + 1, size=2))
            reps["compatibility"].record(check_subroute(engine, r, s0, s1), dict(w, s=(s0, s1)))
        if prev is not None:
            c = check_compatibility(r, prev)
            if c is not None:
                reps["compatibility"].record(c, dict(w, other=prev.as_dict()))
        prev = r
        reps["sigma2"].record(check_sigma2(engine, a, b), w)
        rc = coarse.route(z1, z2)
        reps["multiresolution"].record(rc.same_points(r), w)
    out = {k: v.as_dict() for k, v in reps.items()}
    out["tied_pairs"] = ties
    return out


# ---------------------------------------------------------------------------
# box exclusion and the radius corollary


def _horizontal_inside(turns, x0, x1, y0, y1) -> bool:
    for a, b in zip(turns[:-1], turns[1:]):
        if a[1] == b[1] and y0 < a[1] < y1:
            lo, hi = min(a[0], b[0]), max(a[0], b[0])
            if min(hi, x1) > max(lo, x0):
                return True
    return False


def check_box_exclusion(b_candidate: int, trials: int, params: ModelParams | None = None,
                        h_range=(0, 4), engine: RouteEngine | None = None, seed: int = 0) -> LemmaReport:
    """Routes between points outside a (2^(h+b) x 2^h) dyadic rectangle use no horizontal edge inside it.

    Coordinates are lattice units; ``h`` ranges over ``h_range`` (inclusive).
    Endpoints are drawn outside the rectangle within a margin of one
    rectangle width, half of them on opposite short sides.
    """
    if b_candidate < 1:
        raise ParameterError("b must be at least 1")
    params = params or ModelParams(finest_level=0)
    engine = engine or RouteEngine(params)
    rng = np.random.default_rng(hash_u64(params.master_seed, 6060, b_candidate, seed))
    rep = LemmaReport("box", constants={"b": b_candidate})
    while rep.trials < trials:
        h = int(rng.integers(h_range[0], h_range[1] + 1))
        W, Hh = 1 << (h + b_candidate), 1 << h
        i = int(rng.integers(-4, 4))
        j = int(rng.integers(-8, 8))
        x0, x1, y0, y1 = i * W, (i + 1) * W, j * Hh, (j + 1) * Hh

        def outside():
            while True:
                if rng.uniform() < 0.5:
                    # opposite short sides, the only case the box argument has to exclude
                    p = (int(rng.integers(x0 - W, x0 + 1)), int(rng.integers(y0 - Hh, y1 + Hh + 1)))
                else:
                    p = (int(rng.integers(x0 - W, x1 + W + 1)), int(rng.integers(y0 - W, y1 + W + 1)))
                if not (x0 < p[0] < x1 and y0 < p[1] < y1):
                    return p

        z1 = outside()
        z2 = outside()
        if rng.uniform() < 0.5:
            z2 = (x1 + (x0 - z2[0]), z2[1])  # mirror to the far side
        if z1 == z2:
            continue
        r = engine.route_units(z1, z2)
        bad = _horizontal_inside(r.turns, x0, x1, y0, y1)
        rep.record(not bad, {"rect": [x0, y0, x1, y1], "z1": z1, "z2": z2, "route": r.as_dict()})
    return rep


def extract_b(trials: int, params: ModelParams | None = None, b_max: int = 6, **kw) -> tuple[int, list]:
    """Smallest b with zero box violations over the trial budget."""
    reports = []
    for b in range(1, b_max + 1):
        rep = check_box_exclusion(b, trials, params, **kw)
        reports.append(rep)
        if rep.ok:
            return b, reports
    raise ResourceLimitError(f"no violation-free b up to {b_max}")


def check_radius(route: Route, b: int) -> bool:
    """Every point of a height-h segment is within 2^h (2^b + 1) in L1 of an endpoint (lattice units)."""
    z1, z2 = route.turns[0], route.turns[-1]
    for a, c in zip(route.turns[:-1], route.turns[1:]):
        horiz = a[1] == c[1]
        h = unit_height(a[1] if horiz else a[0], 0)
        if h == INFINITE:
            continue
        R = (1 << h) * ((1 << b) + 1)
        lo, hi = (min(a[0], c[0]), max(a[0], c[0])) if horiz else (min(a[1], c[1]), max(a[1], c[1]))
        s = np.arange(lo, hi + 1)
        if horiz:
            d1 = np.abs(s - z1[0]) + abs(a[1] - z1[1])
            d2 = np.abs(s - z2[0]) + abs(a[1] - z2[1])
        else:
            d1 = np.abs(s - z1[1]) + abs(a[0] - z1[0])
            d2 = np.abs(s - z2[1]) + abs(a[0] - z2[0])
        if np.any(np.minimum(d1, d2) > R):
            return False
    return True


def radius_suite(b: int, trials: int, params: ModelParams | None = None, extent: int = 1 << 10) -> LemmaReport:
    params = params or ModelParams(finest_level=0)
    engine = RouteEngine(params)
    rng = np.random.default_rng(hash_u64(params.master_seed, 7070, b))
    rep = LemmaReport("radius", constants={"b": b})
    while rep.trials < trials:
        z1, z2 = _rand_point(rng, -extent, extent), _rand_point(rng, -extent, extent)
        if z1 == z2:
            continue
        r = engine.route_units(z1, z2)
        rep.record(check_radius(r, b), {"z1": z1, "z2": z2, "route": r.as_dict()})
    return rep


# ---------------------------------------------------------------------------
# constants


def extract_constants(trials: int, params: ModelParams | None = None, scales=(6, 8, 10, 12)) -> LemmaReport:
    """Empirical stretch, excursion and cost-growth constants over several dyadic scales.

    For each trial a pair is drawn with L1 separation of order ``2**s`` for
    ``s`` in ``scales`` (lattice units).  Reported maxima:
    ``K`` = length / L1 distance, ``K_prime`` = side of the smallest square
    centred at z1 containing the route / L1 distance, ``K_cost`` =
    cost / L1 distance ** beta with beta = log2(2 gamma).
    """
    params = params or ModelParams(finest_level=0)
    engine = RouteEngine(params)
    gamma = params.gamma
    beta = math.log2(2 * float(gamma))
    rng = np.random.default_rng(hash_u64(params.master_seed, 8080))
    rep = LemmaReport("constants")
    per_scale = {s: {"K": 0.0, "K_prime": 0.0, "K_cost": 0.0} for s in scales}
    unit = math.ldexp(1.0, engine.level)
    for k in range(trials):
        s = scales[k % len(scales)]
        z1 = _rand_point(rng, -(1 << (s + 1)), 1 << (s + 1))
        d = _rand_point(rng, -(1 << s), 1 << s)
        z2 = (z1[0] + d[0], z1[1] + d[1])
        if z1 == z2:
            continue
        r = engine.route_units(z1, z2)
        l1 = abs(d[0]) + abs(d[1])
        K = r.length_units / l1
        side = 2 * max(max(abs(p[0] - z1[0]), abs(p[1] - z1[1])) for p in r.turns)
        cost = float(r.cost.evaluate(gamma))
        Kc = cost / (l1 * unit) ** beta
        ok = K >= 1
        rep.record(ok, {"z1": z1, "z2": z2, "K": K})
        sc = per_scale[s]
        sc["K"], sc["K_prime"], sc["K_cost"] = max(sc["K"], K), max(sc["K_prime"], side / l1), max(sc["K_cost"], Kc)
    rep.constants = {
        "K": max(v["K"] for v in per_scale.values()),
        "K_prime": max(v["K_prime"] for v in per_scale.values()),
        "K_cost": max(v["K_cost"] for v in per_scale.values()),
        "beta": beta,
    }
    rep.details = {"per_scale": {str(k): v for k, v in per_scale.items()}}
    return rep


# ---------------------------------------------------------------------------
# Figure-6 funnel configuration


def _v2_array(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    low = n & -n
    out = np.zeros(n.shape, dtype=np.int64)
    nz = low != 0
    out[nz] = np.log2(low[nz].astype(np.float64)).round().astype(np.int64)
    out[~nz] = np.iinfo(np.int64).max
    return out


class _BoxGraph:
    """Full lattice on an integer box with exact integer unit costs (as float64)."""

    def __init__(self, x0, x1, y0, y1, level, gamma, max_nodes):
        from scipy.sparse import csr_matrix

        self.x0, self.y0 = x0, y0
        self.nx, self.ny = x1 - x0 + 1, y1 - y0 + 1
        n = self.nx * self.ny
        if n > max_nodes:
            raise ResourceLimitError(f"figure-6 box needs {n} nodes (limit {max_nodes})")
        self.n = n
        p, q = gamma.numerator, gamma.denominator
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        hx = _v2_array(xs) + level
        hy = _v2_array(ys) + level
        if (xs == 0).any() or (ys == 0).any():
            raise ParameterError("box must avoid the zero-cost axes")
        lo, hi = int(min(hx.min(), hy.min())), int(max(hx.max(), hy.max()))
        self.lo, self.hi, self.level, self.gamma = lo, hi, level, gamma
        vx = np.array([p ** (int(h) - lo) * q ** (hi - int(h)) for h in hx], dtype=object)
        vy = np.array([p ** (int(h) - lo) * q ** (hi - int(h)) for h in hy], dtype=object)
        if max(vx.max(), vy.max()) * n >= 2 ** 53:
            raise ResourceLimitError("costs exceed exact float range")
        self.vx, self.vy = vx.astype(np.float64), vy.astype(np.float64)
        idx = np.arange(n).reshape(self.nx, self.ny)
        # horizontal edges (i, j) - (i+1, j) cost hunit(y_j); vertical (i, j) - (i, j+1) cost vunit(x_i)
        hu, hv = idx[:-1, :].ravel(), idx[1:, :].ravel()
        hw = np.broadcast_to(self.vy[None, :], (self.nx - 1, self.ny)).ravel()
        vu, vv = idx[:, :-1].ravel(), idx[:, 1:].ravel()
        vw = np.broadcast_to(self.vx[:, None], (self.nx, self.ny - 1)).ravel()
        self.eu = np.concatenate([hu, vu])
        self.ev = np.concatenate([hv, vv])
        self.ew = np.concatenate([hw, vw])
        self._csr = csr_matrix
        self.graph = self._build(np.ones(len(self.eu), dtype=bool))

    def _build(self, keep):
        u, v, w = self.eu[keep], self.ev[keep], self.ew[keep]
        return self._csr((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                         shape=(self.n, self.n))

    def node(self, p):
        return (p[0] - self.x0) * self.ny + (p[1] - self.y0)

    def point(self, v):
        i, j = divmod(int(v), self.ny)
        return i + self.x0, j + self.y0

    def dist(self, s, graph=None):
        from scipy.sparse.csgraph import dijkstra

        return dijkstra(graph if graph is not None else self.graph, directed=False, indices=s)

    def exact(self, units: float) -> Fraction:
        """Convert an integer unit total into the exact cost."""
        p, q = self.gamma.numerator, self.gamma.denominator
        return Fraction(int(units)) * Fraction(p) ** self.lo / Fraction(q) ** self.hi * Fraction(2) ** self.level

    def tight_edges(self, ds, dt, total):
        out = set()
        for a, b in ((self.eu, self.ev), (self.ev, self.eu)):
            m = ds[a] + self.ew + dt[b] == total
            out.update(zip(a[m].tolist(), b[m].tolist()))
        return out

    def polyline_edges(self, pts):
        out = set()
        for a, b in zip(pts[:-1], pts[1:]):
            dx = (b[0] > a[0]) - (b[0] < a[0])
            dy = (b[1] > a[1]) - (b[1] < a[1])
            x, y = a
            while (x, y) != tuple(b):
                nx_, ny_ = x + dx, y + dy
                out.add((self.node((x, y)), self.node((nx_, ny_))))
                x, y = nx_, ny_
        return out


def _snap(fr: Fraction, level: int) -> int:
    """Nearest multiple of 2**level (ties towards the smaller value), in units."""
    u = fr / Fraction(2) ** level
    f = math.floor(u)
    return f if u - f <= Fraction(1, 2) else f + 1


def figure6_configuration(h: int, gamma) -> dict:
    g = parse_gamma(gamma)
    base = Fraction(2) ** h
    return {
        "G": (base, base + 2),
        "b": (base + 1, base),
        "d": (base + 1, base + Fraction(1, 2 ** h)),
        "c_star": (base + 2 - g ** (h - 1), base + 2),
        "eta": Fraction(1, 2 ** h) * (1 / g - 1),
        "pi_cost": 2 * g ** h + 2 * g,
    }


def natural_level(h: int, gamma) -> int:
    """Finest level needed to place b, d and c* exactly (if c* is dyadic)."""
    g = parse_gamma(gamma)
    lvl = -h
    den = g.denominator ** (h - 1)
    if den & (den - 1) == 0:
        lvl = min(lvl, -(den.bit_length() - 1))
    return lvl


def verify_figure6(h: int, gamma=Fraction(3, 4), level: int | None = None, margin: int = 2,
                   max_nodes: int = 8_000_000) -> LemmaReport:
    """Exhaustive check of the funnel configuration by Dijkstra on the full lattice box.

    The box is G enlarged by ``margin`` on every side.  Checks:
    (a) the minimum-cost paths from b to c* are exactly the two boundary paths;
    (b) the minimum-cost paths from d to c* are exactly [d, b] followed by them;
    (c) every path from d to c* that meets [d, b] only at d costs at least
    eta more than the minimum.
    """
    g = parse_gamma(gamma)
    cfg = figure6_configuration(h, g)
    if level is None:
        level = natural_level(h, g)
    if level > -h:
        raise ParameterError("level must be fine enough to place d")
    f = Fraction(2) ** -level
    G0, G1 = (int(v * f) for v in cfg["G"])
    m = int(margin * f)
    graph = _BoxGraph(G0 - m, G1 + m, G0 - m, G1 + m, level, g, max_nodes)
    b = tuple(int(v * f) for v in cfg["b"])
    d = tuple(int(v * f) for v in cfg["d"])
    cx = _snap(cfg["c_star"][0], level)
    cy = int(cfg["c_star"][1] * f)
    c = (cx, cy)
    snapped = Fraction(cx, 1) / f != cfg["c_star"][0]
    pi1 = [b, (G1, G0), (G1, G1), c]
    pi2 = [b, (G0, G0), (G0, G1), c]
    nb, nd, nc = graph.node(b), graph.node(d), graph.node(c)
    rep = LemmaReport("figure6", constants={"h": h, "gamma": str(g), "level": level, "snapped": snapped,
                                            "nodes": graph.n})
    db = graph.dist(nb)
    dc = graph.dist(nc)
    D = db[nc]
    cost_bc = graph.exact(D)
    # (a)
    tight = graph.tight_edges(db, dc, D)
    e1, e2 = graph.polyline_edges(pi1), graph.polyline_edges(pi2)
    c1 = graph.exact(_path_units(graph, pi1))
    c2 = graph.exact(_path_units(graph, pi2))
    if snapped:
        ok_a = tight in (e1, e2) and cost_bc == min(c1, c2)
    else:
        ok_a = tight == (e1 | e2) and cost_bc == c1 == c2
    rep.record(ok_a, None if ok_a else {"case": "a", "extra_edges": len(tight - (e1 | e2))})
    # (b)
    dd = graph.dist(nd)
    Dd = dd[nc]
    tight_d = graph.tight_edges(dd, dc, Dd)
    seg = graph.polyline_edges([d, b])
    expect = (seg | e1 | e2) if not snapped else (seg | (e1 if c1 < c2 else e2))
    ok_b = tight_d == expect
    rep.record(ok_b, None if ok_b else {"case": "b", "extra_edges": len(tight_d - expect),
                                        "missing_edges": len(expect - tight_d)})
    # (c): remove every node of [d, b] except d
    removed = [graph.node((b[0], y)) for y in range(b[1], d[1])]
    keep = ~(np.isin(graph.eu, removed) | np.isin(graph.ev, removed))
    da = graph.dist(nd, graph._build(keep))
    excess = graph.exact(da[nc]) - graph.exact(Dd)
    ok_c = excess >= cfg["eta"]
    rep.record(ok_c, None if ok_c else {"case": "c", "excess": str(excess)})
    rep.details = {
        "cost_b_to_c": str(cost_bc), "pi1_cost": str(c1), "pi2_cost": str(c2),
        "pi_cost_formula": str(cfg["pi_cost"]), "cost_d_to_c": str(graph.exact(Dd)),
        "avoiding_excess": str(excess), "avoiding_excess_float": float(excess),
        "eta": str(cfg["eta"]), "eta_float": float(cfg["eta"]),
        "a": ok_a, "b": ok_b, "c": ok_c,
    }
    return rep


def _path_units(graph: _BoxGraph, pts) -> float:
    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if a[1] == b[1]:
            tot += abs(b[0] - a[0]) * graph.vy[a[1] - graph.y0]
        else:
            tot += abs(b[1] - a[1]) * graph.vx[a[0] - graph.x0]
    return tot


def search_figure6(gamma=Fraction(3, 4), h_values=range(2, 13), **kw) -> tuple[Optional[int], list]:
    """Smallest h in ``h_values`` for which :func:`verify_figure6` succeeds."""
    reports = []
    for h in h_values:
        try:
            rep = verify_figure6(h, gamma, **kw)
        except ResourceLimitError as exc:
            reports.append({"h": h, "error": str(exc)})
            break
        reports.append(rep.as_dict())
        if rep.ok:
            return h, reports
    return None, reports


def funnel_check(h: int, gamma=Fraction(3, 4), sigma_level: int = -14, n_samples: int = 8,
                 params: ModelParams | None = None) -> LemmaReport:
    """Routes from the small square below-left of d to points on the boundary of G pass through b.

    Uses the exact route engine on the level-``sigma_level`` lattice; the
    small square has side ``2**sigma_level``.
    """
    g = parse_gamma(gamma)
    cfg = figure6_configuration(h, g)
    params = params or ModelParams(gamma=g, finest_level=sigma_level)
    engine = RouteEngine(ModelParams(gamma=g, finest_level=sigma_level, master_seed=params.master_seed))
    f = Fraction(2) ** -sigma_level
    d = tuple(int(v * f) for v in cfg["d"])
    b = tuple(int(v * f) for v in cfg["b"])
    G0, G1 = (int(v * f) for v in cfg["G"])
    rng = np.random.default_rng(hash_u64(params.master_seed, 6161, h))
    rep = LemmaReport("funnel", constants={"h": h, "sigma_level": sigma_level})
    perim = 4 * (G1 - G0)
    for _ in range(n_samples):
        s = (d[0] - int(rng.integers(0, 2)), d[1] + int(rng.integers(0, 2)))
        t = int(rng.integers(0, perim))
        side, off = divmod(t, G1 - G0)
        c = [(G0 + off, G0), (G1, G0 + off), (G1 - off, G1), (G0, G1 - off)][side]
        if c == b:
            continue
        r = engine.route_units(s, c)
        rep.record(_contains_point(r.turns, b), {"s": s, "c": c, "route": r.as_dict()})
    return rep
