"""Exact minimum-cost routes of the binary hierarchy model.

The route between two lattice points is found by Dijkstra on a small grid
of candidate coordinates.  A minimum-cost path only turns at x-values that
form an admissable sequence from x1 to x2, and every member of such a
sequence is either 0 or an endpoint of one of the nested dyadic intervals
around x1 or x2 (the odd multiple of 2**h bounding the 2**h-interval that
contains the endpoint).  The same holds for y.  Searching the product of
these "chain" coordinates is therefore exact, and it needs a few dozen
coordinates per axis instead of the whole lattice.

Among minimum-cost paths the one with the least total secondary weight is
returned.  Costs are integers (exact); weights only enter among tight
edges of the Dijkstra tree.  Travel on the axes is free, so the zero-cost
cross is treated as a tree and handled by a two-pass dynamic program.

A brute-force ``strategy="lattice"`` searches every lattice point of an
adaptive box and is used to cross-check the reduction.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .dyadic import (
    INFINITE,
    DyadicScalar,
    ModelParams,
    PathCost,
    PreconditionError,
    ResourceLimitError,
    unit_height,
    v2,
)
from .weights import HORIZONTAL, VERTICAL, BrownianLineField, field_view, hash_u64, hash_uniform

_EXACT_FLOAT = 2 ** 52


@dataclass(frozen=True)
class DyadicPoint:
    x: DyadicScalar
    y: DyadicScalar

    @classmethod
    def of(cls, p) -> "DyadicPoint":
        if isinstance(p, DyadicPoint):
            return p
        x, y = p
        return cls(DyadicScalar.of(x), DyadicScalar.of(y))

    def units(self, level: int) -> tuple[int, int]:
        return self.x.units(level), self.y.units(level)

    def __iter__(self):
        yield self.x
        yield self.y

    def __str__(self):
        return f"({self.x},{self.y})"


@dataclass(frozen=True)
class SearchBox:
    center: DyadicPoint
    half_side: DyadicScalar
    generation: int


@dataclass(frozen=True)
class Frame:
    """Affine map between the lattice frame and the continuum frame.

    ``z = Rot(angle) (w - shift) / scale`` where ``w`` and ``shift`` are in
    lattice units of ``2**level``.
    """

    angle: float = 0.0
    scale: float = 1.0
    shift: tuple[int, int] = (0, 0)
    level: int = 0

    def to_continuum(self, units) -> np.ndarray:
        w = np.asarray(units, dtype=float).reshape(-1, 2)
        w = (w - np.asarray(self.shift, dtype=float)) * math.ldexp(1.0, self.level)
        c, s = math.cos(self.angle), math.sin(self.angle)
        out = np.empty_like(w)
        out[:, 0] = (c * w[:, 0] - s * w[:, 1]) / self.scale
        out[:, 1] = (s * w[:, 0] + c * w[:, 1]) / self.scale
        return out

    def to_lattice(self, z) -> tuple[int, int]:
        """Snap a continuum point to the nearest lattice point."""
        x, y = float(z[0]) * self.scale, float(z[1]) * self.scale
        c, s = math.cos(self.angle), math.sin(self.angle)
        wx, wy = c * x + s * y, -s * x + c * y
        f = math.ldexp(1.0, -self.level)
        return int(round(wx * f)) + self.shift[0], int(round(wy * f)) + self.shift[1]


@dataclass(eq=False)
class Route:
    """Axis-parallel polyline in lattice units of ``2**level``.

    ``turns`` includes both endpoints.  ``tie_count`` is the number of
    distinct minimum-cost paths between the endpoints; ``states`` counts
    the search nodes settled no later than the destination.
    """

    level: int
    turns: tuple
    cost: PathCost
    tie_count: int = 1
    states: int = 0
    weight_ties: int = 0
    box: Optional[SearchBox] = None
    frame: Optional[Frame] = None
    weights: object = field(default=None, repr=False)
    _weight: Optional[float] = field(default=None, repr=False)

    # -- geometry -----------------------------------------------------
    @property
    def start(self):
        return self.turns[0]

    @property
    def end(self):
        return self.turns[-1]

    @property
    def z1(self) -> DyadicPoint:
        return DyadicPoint(DyadicScalar(self.turns[0][0], self.level), DyadicScalar(self.turns[0][1], self.level))

    @property
    def z2(self) -> DyadicPoint:
        return DyadicPoint(DyadicScalar(self.turns[-1][0], self.level), DyadicScalar(self.turns[-1][1], self.level))

    @property
    def turn_points(self) -> list[DyadicPoint]:
        return [DyadicPoint(DyadicScalar(x, self.level), DyadicScalar(y, self.level)) for x, y in self.turns]

    def segments(self):
        return list(zip(self.turns[:-1], self.turns[1:]))

    @property
    def length_units(self) -> int:
        return sum(abs(b[0] - a[0]) + abs(b[1] - a[1]) for a, b in self.segments())

    @property
    def total_length(self) -> DyadicScalar:
        return DyadicScalar(self.length_units, self.level)

    @property
    def secondary_weight(self) -> float:
        if self._weight is None:
            if self.weights is None:
                raise ValueError("route carries no weight field")
            self._weight = sum(segment_weight(self.weights, a, b) for a, b in self.segments())
        return self._weight

    def reversed(self) -> "Route":
        return replace(self, turns=tuple(reversed(self.turns)))

    def same_points(self, other: "Route") -> bool:
        if self.level != other.level:
            lv = min(self.level, other.level)
            return _rescale(self, lv).same_points(_rescale(other, lv))
        return self.turns == other.turns or self.turns == tuple(reversed(other.turns))

    def scaled_by_two(self) -> "Route":
        """The image under doubling, expressed on the doubled lattice."""
        return replace(self, level=self.level + 1, cost=self.cost.scaled_by_two(), _weight=self._weight)

    def continuum_points(self) -> np.ndarray:
        frame = self.frame or Frame(level=self.level)
        return frame.to_continuum(self.turns)

    def continuum_length(self) -> float:
        sc = self.frame.scale if self.frame else 1.0
        return math.ldexp(float(self.length_units), self.level) / sc

    def height_of_segment(self, a, b) -> float:
        if a[1] == b[1]:
            return unit_height(a[1], self.level)
        return unit_height(a[0], self.level)

    def segments_above(self, h0: int):
        """Segments lying on lines of height at least ``h0``."""
        return [(a, b) for a, b in self.segments() if self.height_of_segment(a, b) >= h0]

    def as_dict(self) -> dict:
        return {
            "from": [str(c) for c in self.z1],
            "to": [str(c) for c in self.z2],
            "turn_points": [[str(c) for c in p] for p in self.turn_points],
            "length": str(self.total_length),
            "cost": self.cost.as_json(),
            "zero_cost_length": str(self.cost.zero_cost_length),
            "tie_count": self.tie_count,
        }


def _rescale(r: Route, level: int) -> Route:
    s = r.level - level
    return replace(r, level=level, turns=tuple((x << s, y << s) for x, y in r.turns))


def segment_weight(weights, a, b) -> float:
    if a[1] == b[1]:
        return weights.increment(HORIZONTAL, a[1], a[0], b[0])
    return weights.increment(VERTICAL, a[0], a[1], b[1])


def path_cost_of(turns, level: int) -> PathCost:
    led: dict[int, int] = {}
    zero = 0
    for a, b in zip(turns[:-1], turns[1:]):
        if a[1] == b[1]:
            line, length = a[1], abs(b[0] - a[0])
        else:
            line, length = a[0], abs(b[1] - a[1])
        if line == 0:
            zero += length
        else:
            h = v2(line) + level
            led[h] = led.get(h, 0) + length
    return PathCost({h: DyadicScalar(L, level) for h, L in led.items()}, DyadicScalar(zero, level))


def chain_candidates(x: int, max_exp: int) -> list[int]:
    """Odd multiples of 2**k bounding the 2**k-interval around ``x``, for v2(x) < k <= max_exp."""
    start = (v2(x) + 1) if x != 0 else max_exp + 1
    out = []
    for k in range(start, max_exp + 1):
        lo = (x >> k) << k
        out.append(lo if (lo >> k) & 1 else lo + (1 << k))
    return out


def chains_in(x: int, lo: int, hi: int) -> list[int]:
    """All chain points of ``x`` (odd multiples of 2**k bounding the 2**k-interval
    around ``x``, k > v2(x)) that lie in ``[lo, hi]``."""
    if x == 0:
        return []
    out = []
    k = v2(x) + 1
    reach = max(abs(lo), abs(hi)) + abs(x)
    while (1 << (k - 1)) <= reach:
        lo_k = (x >> k) << k
        c = lo_k if (lo_k >> k) & 1 else lo_k + (1 << k)
        if lo <= c <= hi:
            out.append(c)
        k += 1
    return out


def _strictly_inside(route, box) -> bool:
    xl, xh, yl, yh = box
    return all(xl < x < xh and yl < y < yh for x, y in route.turns)


def compress_turns(nodes: Sequence[tuple[int, int]]) -> tuple:
    """Drop collinear intermediate vertices of a lattice path."""
    out = [nodes[0]]
    for k in range(1, len(nodes) - 1):
        a, b, c = out[-1], nodes[k], nodes[k + 1]
        if (a[0] == b[0] == c[0]) or (a[1] == b[1] == c[1]):
            continue
        out.append(b)
    if len(nodes) > 1:
        out.append(nodes[-1])
    return tuple(out)


class _Grid:
    """Rectilinear grid graph on sorted coordinate lists, with integer costs."""

    def __init__(self, X, Y, level, gamma):
        self.X, self.Y = list(X), list(Y)
        self.nx, self.ny = len(self.X), len(self.Y)
        self.level = level
        p, q = gamma.numerator, gamma.denominator
        hx = [unit_height(x, level) for x in self.X]
        hy = [unit_height(y, level) for y in self.Y]
        fin = [h for h in hx + hy if h != INFINITE]
        lo, hi = (min(fin), max(fin)) if fin else (0, 0)
        self.vunit = [0 if h == INFINITE else p ** (h - lo) * q ** (hi - h) for h in hx]
        self.hunit = [0 if h == INFINITE else p ** (h - lo) * q ** (hi - h) for h in hy]
        self.dX = [b - a for a, b in zip(self.X, self.X[1:])]
        self.dY = [b - a for a, b in zip(self.Y, self.Y[1:])]
        self.xi = {x: i for i, x in enumerate(self.X)}
        self.yi = {y: j for j, y in enumerate(self.Y)}
        self.i0 = self.xi.get(0)
        self.j0 = self.yi.get(0)

    def node(self, pt) -> int:
        return self.xi[pt[0]] * self.ny + self.yi[pt[1]]

    def point(self, v) -> tuple[int, int]:
        i, j = divmod(v, self.ny)
        return self.X[i], self.Y[j]

    def neighbors(self, v):
        """Yield (u, integer cost) for the grid neighbours of v."""
        ny = self.ny
        i, j = divmod(v, ny)
        if i > 0:
            yield v - ny, self.hunit[j] * self.dX[i - 1]
        if i + 1 < self.nx:
            yield v + ny, self.hunit[j] * self.dX[i]
        if j > 0:
            yield v - 1, self.vunit[i] * self.dY[j - 1]
        if j + 1 < ny:
            yield v + 1, self.vunit[i] * self.dY[j]

    def on_cross(self, v) -> bool:
        i, j = divmod(v, self.ny)
        return i == self.i0 or j == self.j0

    def distances(self, s: int):
        """Exact single-source distances as a list of Python ints."""
        nx, ny = self.nx, self.ny
        bound = sum(self.hunit) * (self.X[-1] - self.X[0]) + sum(self.vunit) * (self.Y[-1] - self.Y[0])
        if bound < _EXACT_FLOAT:
            idx = np.arange(nx * ny).reshape(nx, ny)
            hc = np.outer(np.asarray(self.dX, dtype=float), np.asarray(self.hunit, dtype=float))
            vc = np.outer(np.asarray(self.vunit, dtype=float), np.asarray(self.dY, dtype=float))
            rows = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
            cols = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
            data = np.concatenate([hc.ravel(), vc.ravel()])
            g = sp.csr_matrix((data, (rows, cols)), shape=(nx * ny, nx * ny))
            d = dijkstra(g, directed=False, indices=s)
            return d.astype(np.int64).tolist()
        # arbitrary precision fallback
        INF = None
        dist = [INF] * (nx * ny)
        dist[s] = 0
        heap = [(0, s)]
        done = bytearray(nx * ny)
        while heap:
            d, v = heapq.heappop(heap)
            if done[v]:
                continue
            done[v] = 1
            for u, c in self.neighbors(v):
                nd = d + c
                if dist[u] is None or nd < dist[u]:
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))
        return dist

    def edge_weight(self, weights, u, v) -> float:
        return segment_weight(weights, self.point(u), self.point(v))


def _solve_grid(grid: _Grid, s: int, t: int, weights):
    """Minimum-cost, then minimum-weight, simple s-t path on the grid.

    Returns (node list, number of minimum-cost paths, settled-state count,
    number of exact weight ties resolved by ordering).
    """
    dist = grid.distances(s)
    dt = dist[t]
    states = sum(1 for d in dist if d <= dt)

    # tight predecessors, restricted to nodes that lie on some tight walk to t
    preds: dict[int, list] = {}
    stack = [t]
    preds[t] = None
    while stack:
        v = stack.pop()
        lst = []
        dv = dist[v]
        for u, c in grid.neighbors(v):
            if dist[u] + c == dv:
                lst.append((u, c))
                if u not in preds:
                    preds[u] = None
                    stack.append(u)
        preds[v] = lst
    nodes = sorted(preds, key=lambda v: (dist[v], v))
    cross = [v for v in nodes if grid.on_cross(v)]
    cross_set = set(cross)

    # ---- counting pass ---------------------------------------------
    count: dict[int, int] = {}
    count_in: dict[int, int] = {}
    cross_done = False
    for v in nodes:
        if v in cross_set:
            if not cross_done:
                for a in cross:
                    count_in[a] = sum(count[u] for u, c in preds[a] if c > 0) + (1 if a == s else 0)
                tot = sum(count_in.values())
                for a in cross:
                    count[a] = tot
                cross_done = True
            continue
        count[v] = sum(count[u] for u, c in preds[v] if c > 0) + (1 if v == s else 0)
    n_paths = count[t]

    if n_paths == 1:
        path = _follow_unique(grid, s, t, preds, count, count_in, cross_set)
        return path, 1, states, 0

    # ---- weighted pass ---------------------------------------------
    wcache: dict = {}

    def w(u, v):
        key = (u, v) if u < v else (v, u)
        val = wcache.get(key)
        if val is None:
            val = grid.edge_weight(weights, u, v)
            wcache[key] = val
        return val

    ties = 0
    best: dict[int, float] = {}
    ptr: dict[int, tuple] = {}

    def best_in(v):
        nonlocal ties
        cand = []
        if v == s:
            cand.append((0.0, ("start",)))
        for u, c in sorted(preds[v]):
            if c > 0 and u in best:
                cand.append((best[u] + w(u, v), ("edge", u)))
        if not cand:
            return math.inf, None
        m = min(x for x, _ in cand)
        winners = [tag for x, tag in cand if x == m]
        if len(winners) > 1:
            ties += 1
        return m, winners[0]

    cross_done = False
    for v in nodes:
        if v in cross_set:
            if not cross_done:
                ties += _cross_dp(grid, cross, best_in, w, best, ptr)
                cross_done = True
            continue
        best[v], ptr[v] = best_in(v)

    path = [t]
    v = t
    while True:
        tag = ptr[v]
        if tag[0] == "start":
            break
        if tag[0] == "edge":
            v = tag[1]
            path.append(v)
            continue
        # cross: walk the tree from entry to v, then continue from the entry
        entry, entry_tag = tag[1], tag[2]
        seg = _cross_path(grid, entry, v)
        path.extend(reversed(seg[:-1]))
        v = entry
        if entry_tag[0] == "start":
            break
        v = entry_tag[1]
        path.append(v)
    path.reverse()
    return path, n_paths, states, ties


def _follow_unique(grid, s, t, preds, count, count_in, cross_set):
    path = [t]
    v = t
    while v != s:
        if v in cross_set:
            entry = next(a for a, c in count_in.items() if c)
            seg = _cross_path(grid, entry, v)
            path.extend(reversed(seg[:-1]))
            v = entry
            if v == s:
                break
            u = next(u for u, c in preds[v] if c > 0 and count.get(u, 0))
        else:
            u = next(u for u, c in preds[v] if c > 0 and count.get(u, 0))
        path.append(u)
        v = u
    path.reverse()
    return path


def _cross_path(grid: _Grid, a: int, v: int) -> list[int]:
    """Nodes of the zero-cost tree path from a to v (inclusive)."""
    ny = grid.ny
    ia, ja = divmod(a, ny)
    iv, jv = divmod(v, ny)
    i0, j0 = grid.i0, grid.j0

    def along(p, q):
        (i1, j1), (i2, j2) = divmod(p, ny), divmod(q, ny)
        if i1 == i2:
            step = 1 if j2 >= j1 else -1
            return [i1 * ny + j for j in range(j1, j2 + step, step)]
        step = 1 if i2 >= i1 else -1
        return [i * ny + j1 for i in range(i1, i2 + step, step)]

    if (ia == iv == i0) or (ja == jv == j0):
        return along(a, v)
    o = i0 * ny + j0
    return along(a, o)[:-1] + along(o, v)


def _cross_dp(grid: _Grid, cross, best_in, w, best, ptr) -> int:
    """Minimum-weight arrival at every node of the zero-cost axis cross."""
    ny = grid.ny
    i0, j0 = grid.i0, grid.j0
    entries = {}
    for a in cross:
        entries[a] = best_in(a)
    ties = 0

    if i0 is None:
        o = j0
        arms = [[i * ny + j0 for i in range(1, grid.nx)]]
    elif j0 is None:
        o = i0 * ny
        arms = [[i0 * ny + j for j in range(1, grid.ny)]]
    else:
        o = i0 * ny + j0
        arms = [
            [i0 * ny + j for j in range(j0 + 1, grid.ny)],
            [i0 * ny + j for j in range(j0 - 1, -1, -1)],
            [i * ny + j0 for i in range(i0 + 1, grid.nx)],
            [i * ny + j0 for i in range(i0 - 1, -1, -1)],
        ]
    # nodes of the cross not reachable in the tight graph are simply absent
    def ent(a):
        return entries.get(a, (math.inf, None))

    inward = []  # per arm: list of (value, entry) for the arm's nodes, and value at origin
    to_origin = []
    for arm in arms:
        vals = [None] * len(arm)
        cur = (math.inf, None)
        for k in range(len(arm) - 1, -1, -1):
            a = arm[k]
            if k + 1 < len(arm) and cur[1] is not None:
                cur = (cur[0] + w(arm[k + 1], a), cur[1])
            e = ent(a)
            if e[1] is not None and (cur[1] is None or e[0] < cur[0]):
                cur = (e[0], a)
            elif e[1] is not None and e[0] == cur[0]:
                ties += 1
            vals[k] = cur
        inward.append(vals)
        if arm and vals[0][1] is not None:
            to_origin.append((vals[0][0] + w(arm[0], o), vals[0][1]))
        else:
            to_origin.append((math.inf, None))

    eo = ent(o)
    origin_opts = [(eo[0], o)] if eo[1] is not None else []
    origin_opts += [x for x in to_origin if x[1] is not None]

    def pick(opts):
        nonlocal ties
        opts = [x for x in opts if x[1] is not None]
        if not opts:
            return (math.inf, None)
        m = min(x[0] for x in opts)
        win = sorted(x[1] for x in opts if x[0] == m)
        if len(win) > 1:
            ties += 1
        return (m, win[0])

    ob = pick(origin_opts)
    _assign(best, ptr, o, ob, entries)
    for ai, arm in enumerate(arms):
        opts = ([(eo[0], o)] if eo[1] is not None else []) + [
            to_origin[b] for b in range(len(arms)) if b != ai and to_origin[b][1] is not None
        ]
        cur = pick(opts)
        prev = o
        for k, a in enumerate(arm):
            if k > 0:
                e = ent(prev)
                if e[1] is not None and (cur[1] is None or e[0] < cur[0]):
                    cur = (e[0], prev)
            if cur[1] is not None:
                cur = (cur[0] + w(prev, a), cur[1])
            here = pick([inward[ai][k], cur])
            _assign(best, ptr, a, here, entries)
            prev = a
    return ties


def _assign(best, ptr, v, val, entries):
    if val[1] is None:
        return
    best[v] = val[0]
    ptr[v] = ("cross", val[1], entries[val[1]][1])


class RouteEngine:
    """Computes routes R(z1, z2) of the binary hierarchy model.

    Parameters
    ----------
    params:
        Model parameters; ``params.finest_level`` is the lattice level of
        the search.
    weight_level:
        Level at which the secondary weights live (defaults to the search
        level).  Searching at a coarser level than the weights uses exact
        sums of the finer weights.
    strategy:
        ``"chains"`` (exact reduced search) or ``"lattice"`` (brute force
        over every lattice point of an adaptive box).
    """

    def __init__(self, params: ModelParams | None = None, *, weight_level: int | None = None,
                 field: BrownianLineField | None = None, strategy: str = "chains",
                 max_nodes: int = 6_000_000):
        self.params = params or ModelParams()
        self.level = self.params.finest_level
        self.gamma = self.params.gamma
        self.weight_level = self.level if weight_level is None else weight_level
        self.field = field or BrownianLineField(self.params.master_seed)
        self.weights = field_view(self.field, self.level - self.weight_level)
        if strategy not in ("chains", "lattice"):
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.max_nodes = max_nodes

    # -- derived engines --------------------------------------------------
    def at_level(self, level: int, strategy: str | None = None) -> "RouteEngine":
        """Same weights, searching on the lattice of the given level."""
        return RouteEngine(replace(self.params, finest_level=level), weight_level=self.weight_level,
                           field=self.field, strategy=strategy or self.strategy, max_nodes=self.max_nodes)

    def doubled(self) -> "RouteEngine":
        """Engine for the doubled configuration with weights coupled by doubling."""
        return RouteEngine(replace(self.params, finest_level=self.level + 1),
                           weight_level=self.weight_level + 1, field=self.field,
                           strategy=self.strategy, max_nodes=self.max_nodes)

    # -- queries -----------------------------------------------------------
    def route(self, z1, z2) -> Route:
        a = DyadicPoint.of(z1).units(self.level)
        b = DyadicPoint.of(z2).units(self.level)
        return self.route_units(a, b)

    min_cost_route = route

    def route_units(self, a, b) -> Route:
        a, b = (int(a[0]), int(a[1])), (int(b[0]), int(b[1]))
        if a == b:
            raise PreconditionError("route endpoints coincide")
        if self.strategy == "lattice":
            return self._route_lattice(a, b)
        return self._route_chains(a, b)

    def _finish(self, grid, a, b, box):
        s, t = grid.node(a), grid.node(b)
        path, n, states, ties = _solve_grid(grid, s, t, self.weights)
        turns = compress_turns([grid.point(v) for v in path])
        return Route(self.level, turns, path_cost_of(turns, self.level), tie_count=n, states=states,
                     weight_ties=ties, box=box, weights=self.weights)

    def _box(self, X, Y, gen) -> SearchBox:
        cx = DyadicScalar(X[0] + X[-1], self.level - 1)
        cy = DyadicScalar(Y[0] + Y[-1], self.level - 1)
        half = DyadicScalar(max(X[-1] - X[0], Y[-1] - Y[0]), self.level - 1)
        return SearchBox(DyadicPoint(cx, cy), half, gen)

    def _route_chains(self, a, b):
        half = abs(a[0] - b[0]) + abs(a[1] - b[1])
        prev = None
        prev_box = None
        for gen in range(self.params.search.max_doublings + 1):
            xl, xh = min(a[0], b[0]) - half, max(a[0], b[0]) + half
            yl, yh = min(a[1], b[1]) - half, max(a[1], b[1]) + half
            X = sorted({a[0], b[0], *chains_in(a[0], xl, xh), *chains_in(b[0], xl, xh)} | ({0} if xl <= 0 <= xh else set()))
            Y = sorted({a[1], b[1], *chains_in(a[1], yl, yh), *chains_in(b[1], yl, yh)} | ({0} if yl <= 0 <= yh else set()))
            grid = _Grid(X, Y, self.level, self.gamma)
            r = self._finish(grid, a, b, self._box(X, Y, gen))
            if prev is not None and prev.turns == r.turns and prev.tie_count == r.tie_count \
                    and _strictly_inside(r, prev_box):
                r.states = prev.states
                return r
            prev, prev_box = r, (xl, xh, yl, yh)
            half *= 2
        raise ResourceLimitError(
            f"search box still growing after {self.params.search.max_doublings} doublings")

    def _route_lattice(self, a, b):
        half = max(abs(a[0] - b[0]) + abs(a[1] - b[1]), 2)
        prev = None
        for gen in range(self.params.search.max_doublings + 1):
            xl, xh = min(a[0], b[0]) - half, max(a[0], b[0]) + half
            yl, yh = min(a[1], b[1]) - half, max(a[1], b[1]) + half
            if (xh - xl + 1) * (yh - yl + 1) > self.max_nodes:
                raise ResourceLimitError("lattice search box exceeds the node budget")
            grid = _Grid(range(xl, xh + 1), range(yl, yh + 1), self.level, self.gamma)
            r = self._finish(grid, a, b, self._box(grid.X, grid.Y, gen))
            touches = any(x in (xl, xh) or y in (yl, yh) for x, y in r.turns)
            if prev is not None and prev.turns == r.turns and not touches:
                return r
            prev = r
            half *= 2
        raise ResourceLimitError("lattice search box still growing")

    def route_in_box(self, a, b, box) -> Route:
        """Brute-force route restricted to the lattice rectangle ``box = (xl, xh, yl, yh)``."""
        xl, xh, yl, yh = box
        grid = _Grid(range(xl, xh + 1), range(yl, yh + 1), self.level, self.gamma)
        return self._finish(grid, tuple(a), tuple(b), self._box(grid.X, grid.Y, 0))


def scale_route_by_two(r: Route) -> Route:
    return r.scaled_by_two()


def route_multiresolution_consistency(engine: RouteEngine, z1, z2, h1: int, h2: int,
                                      strategy: str | None = None) -> bool:
    """Whether the routes computed on the level-h1 and level-h2 lattices coincide."""
    if h1 > h2:
        raise ValueError("h1 must not exceed h2")
    if h1 < engine.weight_level:
        raise ValueError("cannot search finer than the weight level")
    fine = engine.at_level(h1, strategy)
    coarse = engine.at_level(h2, strategy)
    r1 = fine.route(z1, z2)
    r2 = coarse.route(z1, z2)
    return r1.same_points(r2)


# ---------------------------------------------------------------------------
# invariance wrapper


@dataclass(frozen=True)
class InvarianceParams:
    """Random translation (coupled across depths), rotation and scale-free rescaling.

    ``u_bits`` encodes U_N for a large N as integers counting units of
    ``2**-64``; ``U_n`` is its reduction modulo ``2**n``, so U_{n+1} and U_n
    agree modulo ``2**n``.
    """

    n: int = 20
    angle: float = 0.0
    scale: float = 1.0
    u_bits: tuple[int, int] = (0, 0)
    seed: int = 0

    U_PRECISION = 64

    @classmethod
    def identity(cls) -> "InvarianceParams":
        return cls(n=0, angle=0.0, scale=1.0, u_bits=(0, 0))

    @classmethod
    def from_seed(cls, seed: int, n: int = 20, big_n: int = 62) -> "InvarianceParams":
        angle = 2.0 * math.pi * hash_uniform(seed, 71)
        scale = 2.0 ** hash_uniform(seed, 72)
        bits = []
        for c in range(2):
            words = [hash_u64(seed, 73, c, w) for w in range((big_n + cls.U_PRECISION) // 64 + 1)]
            val = 0
            for wd in words:
                val = (val << 64) | wd
            bits.append(val % (1 << (big_n + cls.U_PRECISION)))
        return cls(n=n, angle=angle, scale=scale, u_bits=(bits[0], bits[1]), seed=seed)

    def with_depth(self, n: int) -> "InvarianceParams":
        return replace(self, n=n)

    def shift_units(self, level: int) -> tuple[int, int]:
        """U_n snapped down to the level-``level`` lattice, in lattice units."""
        sh = level + self.U_PRECISION
        mod = 1 << (self.n - level) if self.n >= level else 1
        out = []
        for u in self.u_bits:
            w = u >> sh if sh >= 0 else u << -sh
            out.append(w % mod)
        return out[0], out[1]

    def frame(self, level: int) -> Frame:
        return Frame(angle=self.angle, scale=self.scale, shift=self.shift_units(level), level=level)


def continuum_route(z1, z2, inv: InvarianceParams, engine: RouteEngine) -> Route:
    """Route between continuum points under the invariance wrapper.

    The points are rotated, scaled by C and translated by U_n into the
    lattice frame, snapped, routed exactly, and the result carries the
    affine frame back to the continuum.
    """
    if tuple(map(float, z1)) == tuple(map(float, z2)):
        raise PreconditionError("route endpoints coincide")
    fr = inv.frame(engine.level)
    a, b = fr.to_lattice(z1), fr.to_lattice(z2)
    r = engine.route_units(a, b)
    r.frame = fr
    return r
