"""Simulation-scale versions of two alternative network models.

* A marked Poisson line process: each line carries a speed mark and routes
  are minimum-time paths on the line-intersection graph.
* A dynamic Gabriel graph: points arrive in time order and each arrival is
  joined to the earlier points with which it spans an empty diameter disc;
  an edge created at time ``t`` has speed ``t ** -gamma_g``.

Neither model is known to have unique routes; ties are counted, not assumed
away.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .dyadic import ParameterError, SirsnError
from .geometry import PointProcessSample, Window, sample_poisson


class UnreachableError(SirsnError):
    """The two query vertices lie in different components."""


@dataclass(frozen=True)
class MarkedLine:
    theta: float        # normal direction in [0, pi)
    rho: float          # signed offset from the window centre
    speed: Fraction     # rational speed mark


@dataclass
class GraphRoute:
    vertices: list
    points: np.ndarray
    time: object                 # Fraction for the line router, float for Gabriel
    n_optimal: int = 1           # number of distinct time-optimal vertex paths (capped)
    snap_radius: float = 0.0

    @property
    def unique(self) -> bool:
        return self.n_optimal == 1

    def segments(self) -> np.ndarray:
        p = self.points
        return np.column_stack([p[:-1], p[1:]]) if len(p) > 1 else np.zeros((0, 4))


# ---------------------------------------------------------------------------
# marked Poisson line process


def truncated_power_quantile(u, gamma: float, v_min: float, v_max: float):
    """Inverse CDF of the density proportional to x^-gamma on [v_min, v_max]."""
    u = np.asarray(u, dtype=float)
    if v_min == v_max:
        return np.full_like(u, v_min)
    e = 1.0 - gamma
    a, b = v_min ** e, v_max ** e
    return (a + u * (b - a)) ** (1.0 / e)


def truncated_power_cdf(x, gamma: float, v_min: float, v_max: float):
    x = np.clip(np.asarray(x, dtype=float), v_min, v_max)
    e = 1.0 - gamma
    a, b = v_min ** e, v_max ** e
    return (x ** e - a) / (b - a)


def sample_line_process(window: Window, rate: float, gamma_lines: float, v_min: float, v_max: float,
                        seed: int, denominator: int = 2 ** 20) -> list:
    """Poisson lines of the given rate that meet the window, with rational speed marks.

    Lines are parametrised by normal angle ``theta`` in [0, pi) and offset
    ``rho`` from the window centre.  The expected number meeting a convex
    set is ``rate`` times its perimeter.  Marks are drawn by inverse CDF and
    rounded to rationals with the given denominator bound.
    """
    if not gamma_lines > 2:
        raise ParameterError("gamma_lines must exceed 2")
    if not 0 < v_min <= v_max:
        raise ParameterError("need 0 < v_min <= v_max")
    if not rate > 0:
        raise ParameterError("rate must be positive")
    rng = np.random.default_rng(seed)
    hx, hy = (window.x1 - window.x0) / 2, (window.y1 - window.y0) / 2
    R = math.hypot(hx, hy)
    n = rng.poisson(rate * 2 * math.pi * R)
    theta = rng.uniform(0.0, math.pi, n)
    rho = rng.uniform(-R, R, n)
    v = truncated_power_quantile(rng.uniform(size=n), gamma_lines, v_min, v_max)
    out = []
    for t, r, s in zip(theta, rho, v):
        # support function of the rectangle in direction theta
        if abs(r) <= hx * abs(math.cos(t)) + hy * abs(math.sin(t)):
            sp = Fraction(v_min) if v_min == v_max else Fraction(float(s)).limit_denominator(denominator)
            out.append(MarkedLine(float(t), float(r), sp))
    return out


class LineNetwork:
    """Intersection graph of marked lines clipped to a window.

    Edge lengths are the floating-point distances between consecutive
    intersections, treated as exact rationals, so path times are exact
    rationals and ties are detected exactly.
    """

    def __init__(self, lines: list, window: Window):
        self.lines = list(lines)
        self.window = window
        cx, cy = (window.x0 + window.x1) / 2, (window.y0 + window.y1) / 2
        self.center = (cx, cy)
        self.vertex_index: dict = {}
        pts = []
        on_line: dict = {k: [] for k in range(len(self.lines))}
        for i in range(len(self.lines)):
            for j in range(i + 1, len(self.lines)):
                p = self._intersect(i, j)
                if p is None:
                    continue
                if not (window.x0 <= p[0] <= window.x1 and window.y0 <= p[1] <= window.y1):
                    continue
                v = len(pts)
                pts.append(p)
                self.vertex_index[(i, j)] = v
                on_line[i].append(v)
                on_line[j].append(v)
        self.points = np.array(pts).reshape(-1, 2)
        self.adj: list = [[] for _ in range(len(pts))]
        for k, vs in on_line.items():
            ln = self.lines[k]
            d = np.array([-math.sin(ln.theta), math.cos(ln.theta)])
            vs = sorted(vs, key=lambda v: float(self.points[v] @ d))
            for a, b in zip(vs[:-1], vs[1:]):
                length = Fraction(float(np.hypot(*(self.points[b] - self.points[a]))))
                t = length / ln.speed
                self.adj[a].append((b, t, k))
                self.adj[b].append((a, t, k))
        self._tree = cKDTree(self.points) if len(pts) else None

    def _intersect(self, i, j):
        a, b = self.lines[i], self.lines[j]
        m = np.array([[math.cos(a.theta), math.sin(a.theta)], [math.cos(b.theta), math.sin(b.theta)]])
        det = np.linalg.det(m)
        if abs(det) < 1e-14:
            return None
        x = np.linalg.solve(m, [a.rho, b.rho])
        return float(x[0] + self.center[0]), float(x[1] + self.center[1])

    def vertex_of(self, i: int, j: int) -> Optional[int]:
        return self.vertex_index.get((min(i, j), max(i, j)))

    def snap(self, z) -> tuple[int, float]:
        if self._tree is None:
            raise UnreachableError("no vertices in window")
        d, k = self._tree.query(np.asarray(z, dtype=float))
        return int(k), float(d)

    def route_vertices(self, s: int, t: int, count_cap: int = 2) -> GraphRoute:
        dist, count, pred = _exact_dijkstra(self.adj, s, t, count_cap)
        if t not in dist:
            raise UnreachableError(f"vertex {t} unreachable from {s}")
        path = [t]
        while path[-1] != s:
            path.append(pred[path[-1]])
        path.reverse()
        return GraphRoute(path, self.points[path], dist[t], count[t])

    def time(self, s: int, t: int) -> Fraction:
        return self.route_vertices(s, t).time


def _exact_dijkstra(adj, s: int, t: Optional[int], cap: int):
    """Dijkstra with exact (Fraction) weights and capped shortest-path counting."""
    dist = {s: Fraction(0)}
    count = {s: 1}
    pred = {}
    done = set()
    heap = [(Fraction(0), s)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done or d != dist[u]:
            continue
        done.add(u)
        if u == t:
            break
        for v, w, _ in adj[u]:
            nd = d + w
            old = dist.get(v)
            if old is None or nd < old:
                dist[v], count[v], pred[v] = nd, count[u], u
                heapq.heappush(heap, (nd, v))
            elif nd == old and v not in done:
                count[v] = min(cap, count[v] + count[u])
                if u < pred[v]:
                    pred[v] = u
    return dist, count, pred


def min_time_route_lines(z1, z2, net: LineNetwork) -> GraphRoute:
    """Minimum-time route between the vertices nearest to z1 and z2."""
    s, r1 = net.snap(z1)
    t, r2 = net.snap(z2)
    route = net.route_vertices(s, t)
    route.snap_radius = max(r1, r2)
    return route


def line_uniqueness_probe(net: LineNetwork, n_queries: int, seed: int) -> dict:
    """Fraction of random vertex pairs with more than one time-optimal path."""
    rng = np.random.default_rng(seed)
    n = len(net.points)
    ties = done = unreachable = 0
    for _ in range(n_queries):
        s, t = (int(x) for x in rng.choice(n, 2, replace=False))
        try:
            r = net.route_vertices(s, t)
        except UnreachableError:
            unreachable += 1
            continue
        done += 1
        ties += not r.unique
    return {"queries": done, "ties": ties, "unreachable": unreachable,
            "tie_fraction": ties / done if done else float("nan")}


# ---------------------------------------------------------------------------
# dynamic Gabriel graph


def in_open_disc(p, a, b) -> bool:
    """Exact test that p lies strictly inside the disc with diameter ab."""
    v = (p[0] - a[0]) * (p[0] - b[0]) + (p[1] - a[1]) * (p[1] - b[1])
    scale = abs(p[0] - a[0]) * abs(p[0] - b[0]) + abs(p[1] - a[1]) * abs(p[1] - b[1])
    if abs(v) > 1e-9 * scale:
        return v < 0
    fa = [Fraction(float(c)) for c in (*p, *a, *b)]
    return (fa[0] - fa[2]) * (fa[0] - fa[4]) + (fa[1] - fa[3]) * (fa[1] - fa[5]) < 0


@dataclass
class DynamicGraph:
    points: np.ndarray
    times: np.ndarray
    gamma_g: float
    window: Window
    edges: list = field(default_factory=list)      # (i, j) with i < j; created at times[j]

    @property
    def n(self) -> int:
        return len(self.points)

    def edge_set(self) -> set:
        return set(self.edges)

    def edge_times(self) -> np.ndarray:
        """Traversal time of each edge: length * creation_time ** gamma_g."""
        if not self.edges:
            return np.zeros(0)
        e = np.asarray(self.edges)
        length = np.hypot(*(self.points[e[:, 1]] - self.points[e[:, 0]]).T)
        return length * self.times[e[:, 1]] ** self.gamma_g

    def snapshot(self, lam: float) -> "DynamicGraph":
        """The graph as it stood at time ``lam``."""
        k = int(np.searchsorted(self.times, lam, side="right"))
        return DynamicGraph(self.points[:k], self.times[:k], self.gamma_g, self.window,
                            [e for e in self.edges if e[1] < k])

    def segments(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 4))
        e = np.asarray(self.edges)
        return np.column_stack([self.points[e[:, 0]], self.points[e[:, 1]]])


def gabriel_neighbours(points: np.ndarray, k: int, tree: Optional[cKDTree] = None,
                       window: Optional[Window] = None) -> list:
    """Indices i < k such that the open disc with diameter (points[i], points[k]) holds no point j < k.

    Earlier points are visited in order of distance from ``points[k]``.  A
    point p at distance d blocks every candidate at distance D > d whose
    direction lies within arccos(d / D) of the direction of p, and these
    blocking arcs widen as D grows, so the scan stops once the arcs cover
    the circle.  When the window is given, each of its sides acts as a
    blocker at its distance from ``points[k]``, since no candidate lies
    beyond it.
    """
    if k == 0:
        return []
    z = points[k]
    if tree is None or k <= 64:
        order = np.arange(k)
        dist = np.hypot(*(points[:k] - z).T)
        order = order[np.argsort(dist, kind="stable")]
        return _scan(points, z, order, dist[order], stop_early=False)
    K = min(len(points), max(32, int(16 * len(points) / k)))
    while True:
        d, idx = tree.query(z, k=K)
        d, idx = np.atleast_1d(d), np.atleast_1d(idx)
        keep = idx < k
        res = _scan(points, z, idx[keep], d[keep], stop_early=True, walls=_walls(z, window))
        if res is not None:
            return res
        if K >= len(points):
            return _scan(points, z, idx[keep], d[keep], stop_early=False)
        K = min(len(points), 2 * K)


def _walls(z, window: Optional[Window]):
    if window is None:
        return np.zeros(0), np.zeros(0)
    ang = np.array([0.0, math.pi, math.pi / 2, -math.pi / 2])
    dist = np.array([window.x1 - z[0], z[0] - window.x0, window.y1 - z[1], z[1] - window.y0])
    return ang, np.maximum(dist, 0.0)


def _scan(points, z, order, dist, stop_early: bool, walls=(np.zeros(0), np.zeros(0))):
    out = []
    seen = []
    angles = []
    for m, (i, d) in enumerate(zip(order, dist)):
        b = points[i]
        blocked = False
        if seen:
            q = points[seen]
            v = (q[:, 0] - z[0]) * (q[:, 0] - b[0]) + (q[:, 1] - z[1]) * (q[:, 1] - b[1])
            cand = np.flatnonzero(v < 1e-9 * (d * d + 1e-300))
            blocked = any(in_open_disc(points[seen[c]], z, b) for c in cand)
        if not blocked:
            out.append(int(i))
        seen.append(int(i))
        angles.append(math.atan2(b[1] - z[1], b[0] - z[0]))
        if stop_early and m % 4 == 3 and _covered(np.concatenate([angles, walls[0]]),
                                                        np.concatenate([dist[:m + 1], walls[1]]), d):
            # every later candidate lies at distance >= d and is blocked
            return sorted(out)
    return None if stop_early else sorted(out)


def _covered(angles: np.ndarray, dist: np.ndarray, D: float, slack: float = 1e-9) -> bool:
    """Whether arcs of half-width arccos(d / D) about ``angles`` cover the circle."""
    if D <= 0:
        return False
    half = np.arccos(np.clip(dist / D, -1.0, 1.0)) - slack
    ok = half > 0
    if not np.any(ok):
        return False
    lo = np.mod(angles[ok] - half[ok], 2 * math.pi)
    hi = lo + 2 * half[ok]
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    # walk once around starting from the arc with the smallest start
    start = lo[0]
    reach = hi[0]
    for a, b in zip(lo[1:], hi[1:]):
        if a > reach:
            return False
        reach = max(reach, b)
    # wrap: arcs extending past 2*pi must reach the first start
    return reach >= start + 2 * math.pi


def build_dynamic_gabriel(lam_max: float, gamma_g: float, window: Window, seed: int,
                          gamma_star: float = 1.0, sample: Optional[PointProcessSample] = None) -> DynamicGraph:
    """Insert points in arrival order, joining each to its Gabriel neighbours among earlier points."""
    if not 0 <= gamma_g < gamma_star:
        raise ParameterError("gamma_g must lie in [0, gamma_star)")
    if sample is None:
        sample = sample_poisson(lam_max, window, seed)
    pts = np.asarray(sample.points, dtype=float)
    tree = cKDTree(pts) if len(pts) else None
    edges = []
    for k in range(len(pts)):
        for i in gabriel_neighbours(pts, k, tree, sample.window):
            edges.append((i, k))
    return DynamicGraph(pts, np.asarray(sample.times, dtype=float), gamma_g, window, edges)


def gabriel_from_points(points, gamma_g: float = 0.0) -> DynamicGraph:
    """Dynamic Gabriel graph of points given in arrival order (arrival times 1, 2, ...)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    times = np.arange(1, len(pts) + 1, dtype=float)
    lo, hi = pts.min(axis=0) if len(pts) else (0, 0), pts.max(axis=0) if len(pts) else (0, 0)
    win = Window(float(lo[0]) - 1.0, float(lo[1]) - 1.0, float(hi[0]) + 1.0, float(hi[1]) + 1.0)
    return build_dynamic_gabriel(1.0, gamma_g, win, 0,
                                 sample=PointProcessSample(pts, times, float(len(pts)), win, 0))


def _gabriel_matrix(g: DynamicGraph):
    e = np.asarray(g.edges).reshape(-1, 2)
    w = g.edge_times()
    return coo_matrix((w, (e[:, 0], e[:, 1])), shape=(g.n, g.n)).tocsr()


def min_time_route_gabriel(z1, z2, g: DynamicGraph, tie_rtol: float = 1e-12) -> GraphRoute:
    """Minimum-time route between the graph vertices nearest to z1 and z2."""
    tree = cKDTree(g.points)
    r1, s = tree.query(np.asarray(z1, dtype=float))
    r2, t = tree.query(np.asarray(z2, dtype=float))
    s, t = int(s), int(t)
    M = _gabriel_matrix(g)
    dist, pred = dijkstra(M, directed=False, indices=s, return_predecessors=True)
    if not np.isfinite(dist[t]):
        raise UnreachableError(f"vertex {t} unreachable from {s}")
    path = [t]
    while path[-1] != s:
        path.append(int(pred[path[-1]]))
    path.reverse()
    n_opt = _count_optimal(g, M, dist, s, t, tie_rtol)
    return GraphRoute(path, g.points[path], float(dist[t]), n_opt, float(max(r1, r2)))


def _count_optimal(g, M, dist, s, t, rtol, cap: int = 2) -> int:
    """Number of time-optimal paths from s to t (capped), with a relative tie tolerance."""
    M = M.maximum(M.T).tocsr()
    order = np.argsort(dist)
    count = np.zeros(g.n)
    count[s] = 1
    for u in order:
        if not np.isfinite(dist[u]) or dist[u] > dist[t]:
            break
        if u == s:
            continue
        lo, hi = M.indptr[u], M.indptr[u + 1]
        for v, w in zip(M.indices[lo:hi], M.data[lo:hi]):
            if abs(dist[v] + w - dist[u]) <= rtol * max(dist[u], 1e-300):
                count[u] = min(cap, count[u] + count[v])
    return int(count[t])


def gabriel_scale_statistics(g: DynamicGraph, lam: float) -> dict:
    """Scale-free summaries of the graph: edges per point and mean edge length times sqrt(lam)."""
    if not g.edges:
        return {"edges_per_point": 0.0, "scaled_length": float("nan")}
    e = np.asarray(g.edges)
    length = np.hypot(*(g.points[e[:, 1]] - g.points[e[:, 0]]).T)
    return {"edges_per_point": len(g.edges) / max(g.n, 1), "scaled_length": float(length.mean() * math.sqrt(lam))}


def gabriel_scale_check(lam: float, c: float, half: float, n_reps: int, seed: int, gamma_g: float = 0.0) -> dict:
    """Compare G(lam) on a square of half-side ``half`` scaled by ``c`` against G(lam / c^2) on the scaled square."""
    rows = {"base": [], "scaled": []}
    for rep in range(n_reps):
        g1 = build_dynamic_gabriel(lam, gamma_g, Window.square(half), seed + 2 * rep)
        g2 = build_dynamic_gabriel(lam / c ** 2, gamma_g, Window.square(c * half), seed + 2 * rep + 1)
        s1 = gabriel_scale_statistics(g1, lam)
        s2 = gabriel_scale_statistics(g2, lam / c ** 2)
        rows["base"].append([s1["edges_per_point"], s1["scaled_length"]])
        rows["scaled"].append([s2["edges_per_point"], s2["scaled_length"]])
    out = {}
    for k, v in rows.items():
        a = np.asarray(v)
        out[k] = {"mean": a.mean(axis=0).tolist(),
                  "se": (a.std(axis=0, ddof=1) / math.sqrt(len(a))).tolist() if len(a) > 1 else [0.0, 0.0]}
    return out
