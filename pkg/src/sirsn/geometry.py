"""Poisson sampling, subnetwork assembly and the edge-intensity / crossing machinery.

A :class:`Subnetwork` lives in the lattice frame: for every horizontal and
vertical lattice line it keeps the merged integer intervals covered by
routes, which is the same information as the deduplicated set of
finest-level unit edges.  An optional :class:`~sirsn.routing.Frame` maps
it to the continuum, where intensities are measured in axis-aligned
windows and crossings with reference lines are computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .dyadic import ParameterError, PreconditionError, unit_height
from .routing import Frame, Route, RouteEngine


class MarginError(PreconditionError):
    pass


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle [x0, x1] x [y0, y1] in the continuum frame."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 >= self.x0 and self.y1 >= self.y0):
            raise ParameterError("degenerate window")

    @classmethod
    def square(cls, half: float, center=(0.0, 0.0)) -> "Window":
        cx, cy = center
        return cls(cx - half, cy - half, cx + half, cy + half)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def shrink(self, m: float) -> "Window":
        return Window(self.x0 + m, self.y0 + m, self.x1 - m, self.y1 - m)

    def contains_window(self, other: "Window", margin: float = 0.0) -> bool:
        return (other.x0 - margin >= self.x0 and other.y0 - margin >= self.y0
                and other.x1 + margin <= self.x1 and other.y1 + margin <= self.y1)

    def as_list(self):
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass
class PointProcessSample:
    points: np.ndarray          # (n, 2) continuum coordinates
    times: np.ndarray           # arrival times in [0, intensity]
    intensity: float
    window: Window
    seed: int

    def thin(self, lam: float) -> "PointProcessSample":
        """The points that arrived by time ``lam``."""
        if lam > self.intensity:
            raise ParameterError("cannot thin to a larger intensity")
        keep = self.times <= lam
        return PointProcessSample(self.points[keep], self.times[keep], lam, self.window, self.seed)

    def __len__(self):
        return len(self.points)


def sample_poisson(lam: float, window: Window, seed, rng: np.random.Generator | None = None) -> PointProcessSample:
    """Poisson process of intensity ``lam`` on ``window`` with uniform arrival times."""
    if not lam > 0:
        raise ParameterError("intensity must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    n = rng.poisson(lam * window.area)
    xs = rng.uniform(window.x0, window.x1, n)
    ys = rng.uniform(window.y0, window.y1, n)
    times = rng.uniform(0.0, lam, n)
    order = np.argsort(times, kind="stable")
    pts = np.column_stack([xs, ys])[order]
    return PointProcessSample(pts, times[order], lam, window, seed)


def _merge(intervals):
    intervals = sorted(intervals)
    out = []
    for a, b in intervals:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return out


class Subnetwork:
    """Union of axis-parallel segments on the level-``level`` lattice.

    ``h`` maps a horizontal line's y to merged x-intervals, ``v`` maps a
    vertical line's x to merged y-intervals (integer lattice units).
    """

    def __init__(self, level: int, frame: Optional[Frame] = None, window: Optional[Window] = None):
        self.level = level
        self.frame = frame or Frame(level=level)
        self.window = window
        self.h: dict[int, list] = {}
        self.v: dict[int, list] = {}
        self.marks: dict = {}
        self._dirty = False

    # -- construction --------------------------------------------------
    def add_segment(self, a, b):
        (x0, y0), (x1, y1) = a, b
        if y0 == y1 and x0 != x1:
            self.h.setdefault(y0, []).append([min(x0, x1), max(x0, x1)])
        elif x0 == x1 and y0 != y1:
            self.v.setdefault(x0, []).append([min(y0, y1), max(y0, y1)])
        elif x0 != x1:
            raise ValueError("segment is not axis-parallel")
        self._dirty = True

    def add_route(self, route: Route, mark=None):
        for a, b in route.segments():
            self.add_segment(a, b)
        if mark is not None:
            self.marks[mark] = route

    def normalize(self) -> "Subnetwork":
        if self._dirty:
            self.h = {k: _merge(v) for k, v in self.h.items() if v}
            self.v = {k: _merge(v) for k, v in self.v.items() if v}
            self._dirty = False
        return self

    def union(self, other: "Subnetwork") -> "Subnetwork":
        if other.level != self.level:
            raise ValueError("level mismatch")
        out = Subnetwork(self.level, self.frame, self.window)
        for src in (self, other):
            for k, ivs in src.h.items():
                out.h.setdefault(k, []).extend([list(i) for i in ivs])
            for k, ivs in src.v.items():
                out.v.setdefault(k, []).extend([list(i) for i in ivs])
        out._dirty = True
        return out.normalize()

    # -- queries --------------------------------------------------------
    @property
    def edge_count(self) -> int:
        """Number of finest-level unit edges."""
        self.normalize()
        return sum(b - a for ivs in self.h.values() for a, b in ivs) + \
            sum(b - a for ivs in self.v.values() for a, b in ivs)

    def total_length(self) -> float:
        """Lattice-frame length."""
        return math.ldexp(float(self.edge_count), self.level)

    def contains(self, other: "Subnetwork") -> bool:
        """Edge-for-edge inclusion ``other`` ⊆ ``self``."""
        self.normalize()
        other.normalize()
        for mine, theirs in ((self.h, other.h), (self.v, other.v)):
            for k, ivs in theirs.items():
                cover = mine.get(k, [])
                for a, b in ivs:
                    if not any(c <= a and b <= d for c, d in cover):
                        return False
        return True

    def segments(self) -> np.ndarray:
        """(n, 4) array of lattice-unit segments x0, y0, x1, y1 (horizontal first)."""
        self.normalize()
        rows = [(a, y, b, y) for y, ivs in self.h.items() for a, b in ivs]
        rows += [(x, a, x, b) for x, ivs in self.v.items() for a, b in ivs]
        if not rows:
            return np.zeros((0, 4))
        return np.asarray(rows, dtype=float)

    def continuum_segments(self) -> np.ndarray:
        seg = self.segments()
        if len(seg) == 0:
            return seg
        p = self.frame.to_continuum(seg[:, :2])
        q = self.frame.to_continuum(seg[:, 2:])
        return np.hstack([p, q])

    def heights(self) -> list:
        self.normalize()
        out = [unit_height(y, self.level) for y, ivs in self.h.items() for _ in ivs]
        out += [unit_height(x, self.level) for x, ivs in self.v.items() for _ in ivs]
        return out


def build_subnetwork(points, engine: RouteEngine, frame: Optional[Frame] = None,
                     window: Optional[Window] = None, marks: bool = False,
                     routes: Optional[dict] = None) -> Subnetwork:
    """Union of the routes between all pairs of lattice points (integer units).

    ``routes`` may carry a cache keyed by index pairs; it is filled in.
    """
    pts = [tuple(map(int, p)) for p in points]
    if len(pts) < 2:
        raise PreconditionError("need at least two points")
    net = Subnetwork(engine.level, frame, window)
    cache = routes if routes is not None else {}
    for j in range(len(pts)):
        for i in range(j):
            if pts[i] == pts[j]:
                continue
            key = (pts[i], pts[j])
            r = cache.get(key)
            if r is None:
                r = engine.route_units(pts[i], pts[j])
                cache[key] = r
            net.add_route(r, mark=(i, j) if marks else None)
    return net.normalize()


def strip_endpoint_discs(route: Route, r: float, scale: float | None = None) -> list:
    """Unit edges of the route whose midpoints lie at distance >= r from both endpoints.

    ``r`` is a continuum distance; the route's frame scale converts it to
    the lattice frame.  Returns maximal retained segments in lattice units.
    """
    if not r > 0:
        raise ParameterError("r must be positive")
    if scale is None:
        scale = route.frame.scale if route.frame is not None else 1.0
    R = r * scale / math.ldexp(1.0, route.level)
    R2 = R * R
    ends = (route.turns[0], route.turns[-1])
    out = []
    for a, b in route.segments():
        horiz = a[1] == b[1]
        lo, hi = (min(a[0], b[0]), max(a[0], b[0])) if horiz else (min(a[1], b[1]), max(a[1], b[1]))
        line = a[1] if horiz else a[0]
        keep = [(lo, hi)]
        for c in ends:
            along, off = (c[0], c[1]) if horiz else (c[1], c[0])
            d2 = R2 - (line - off) ** 2
            if d2 <= 0:
                continue
            w = math.sqrt(d2)
            # edge [k, k+1] removed iff |k + 1/2 - along| < w
            k_lo = math.floor(along - w - 0.5) + 1
            k_hi = math.ceil(along + w - 0.5) - 1
            if k_lo > k_hi:
                continue
            cut_lo, cut_hi = k_lo, k_hi + 1
            nxt = []
            for u, v in keep:
                if cut_lo > u:
                    nxt.append((u, min(v, cut_lo)))
                if cut_hi < v:
                    nxt.append((max(u, cut_hi), v))
            keep = [(u, v) for u, v in nxt if v > u]
        for u, v in keep:
            out.append(((u, line), (v, line)) if horiz else ((line, u), (line, v)))
    return out


def build_E(routes: Iterable[Route], r: float, level: int, frame: Frame, window: Optional[Window] = None) -> Subnetwork:
    """Union of the routes with discs of radius ``r`` about their endpoints removed."""
    net = Subnetwork(level, frame, window)
    for rt in routes:
        for a, b in strip_endpoint_discs(rt, r, frame.scale):
            net.add_segment(a, b)
    return net.normalize()


def clipped_lengths(seg: np.ndarray, win: Window) -> np.ndarray:
    """Length of each continuum segment inside the window (Liang-Barsky)."""
    if len(seg) == 0:
        return np.zeros(0)
    x0, y0, x1, y1 = seg[:, 0], seg[:, 1], seg[:, 2], seg[:, 3]
    dx, dy = x1 - x0, y1 - y0
    t0 = np.zeros(len(seg))
    t1 = np.ones(len(seg))
    ok = np.ones(len(seg), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for p, q in ((-dx, x0 - win.x0), (dx, win.x1 - x0), (-dy, y0 - win.y0), (dy, win.y1 - y0)):
            zero = p == 0
            ok &= ~(zero & (q < 0))
            r = q / p
            neg = p < 0
            pos = p > 0
            t0 = np.where(neg, np.maximum(t0, r), t0)
            t1 = np.where(pos, np.minimum(t1, r), t1)
    frac = np.where(ok & (t1 > t0), t1 - t0, 0.0)
    return frac * np.hypot(dx, dy)


def disc_clipped_lengths(seg: np.ndarray, center, radius: float) -> np.ndarray:
    """Length of each segment inside the closed disc of given centre and radius."""
    if len(seg) == 0:
        return np.zeros(0)
    a = seg[:, :2] - np.asarray(center, float)
    d = seg[:, 2:] - seg[:, :2]
    A = (d * d).sum(axis=1)
    B = 2.0 * (a * d).sum(axis=1)
    C = (a * a).sum(axis=1) - radius * radius
    disc = B * B - 4.0 * A * C
    ok = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.clip((-B - sq) / (2.0 * A), 0.0, 1.0)
        t1 = np.clip((-B + sq) / (2.0 * A), 0.0, 1.0)
    return np.where(ok, t1 - t0, 0.0) * np.sqrt(A)


def length_in_window(net: Subnetwork, win: Window) -> float:
    return float(clipped_lengths(net.continuum_segments(), win).sum())


def edge_intensity(net: Subnetwork, sub: Window, margin: float = 0.0) -> float:
    """Length inside ``sub`` per unit area (one realisation).

    ``sub`` must sit inside the network's sampling window with at least
    ``margin`` to spare.
    """
    if net.window is not None and not net.window.contains_window(sub, margin):
        raise MarginError("measurement window violates the declared safety margin")
    return length_in_window(net, sub) / sub.area


@dataclass(frozen=True)
class CrossingRecord:
    position: float   # signed position along the reference segment
    angle: float      # incidence angle in (0, pi)


def segment_crossings(seg: np.ndarray, p0, p1) -> list:
    """Transversal crossings of continuum segments with the segment p0 -> p1."""
    if len(seg) == 0:
        return []
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    u = p1 - p0
    L = float(np.hypot(*u))
    u = u / L
    a = seg[:, :2] - p0
    b = seg[:, 2:] - p0
    sa = u[0] * a[:, 1] - u[1] * a[:, 0]
    sb = u[0] * b[:, 1] - u[1] * b[:, 0]
    hit = (sa * sb) < 0
    if not hit.any():
        return []
    a, b, sa, sb = a[hit], b[hit], sa[hit], sb[hit]
    lam = sa / (sa - sb)
    pt = a + lam[:, None] * (b - a)
    pos = pt @ u
    inside = (pos > 0) & (pos < L)
    d = (b - a)[inside]
    ang = np.mod(np.arctan2(u[0] * d[:, 1] - u[1] * d[:, 0], d @ u), np.pi)
    return [CrossingRecord(float(p), float(t)) for p, t in zip(pos[inside], ang)]


def line_crossings(net: Subnetwork, p0, p1) -> list:
    """Crossings of the network (in its continuum frame) with a reference segment."""
    return segment_crossings(net.continuum_segments(), p0, p1)


# ---------------------------------------------------------------------------
# export

def to_csv(net: Subnetwork, continuum: bool = False) -> str:
    """CSV edge list ``x1,y1,x2,y2,height,mark`` (one row per maximal segment)."""
    net.normalize()
    lines = ["x1,y1,x2,y2,height,mark"]
    scale = math.ldexp(1.0, net.level)
    mark_of = {}
    for key, rt in net.marks.items():
        for a, b in rt.segments():
            mark_of.setdefault((a, b), key)
    rows = []
    for y, ivs in sorted(net.h.items()):
        for a, b in ivs:
            rows.append(((a, y), (b, y), unit_height(y, net.level)))
    for x, ivs in sorted(net.v.items()):
        for a, b in ivs:
            rows.append(((x, a), (x, b), unit_height(x, net.level)))
    for p, q, h in rows:
        if continuum:
            c = net.frame.to_continuum([p, q])
            coords = [repr(float(v)) for v in (c[0, 0], c[0, 1], c[1, 0], c[1, 1])]
        else:
            coords = [repr(v * scale) for v in (p[0], p[1], q[0], q[1])]
        mark = mark_of.get((p, q), mark_of.get((q, p), ""))
        mark = "" if mark == "" else "-".join(map(str, mark))
        hs = "inf" if h == math.inf else str(h)
        lines.append(",".join(coords + [hs, mark]))
    return "\n".join(lines) + "\n"


def to_svg(segments: np.ndarray, points=None, size: int = 600, highlight=None) -> str:
    """Minimal SVG rendering of continuum segments (and optional points)."""
    segs = np.asarray(segments, float).reshape(-1, 4)
    allxy = segs.reshape(-1, 2)
    if points is not None and len(points):
        allxy = np.vstack([allxy, np.asarray(points, float)])
    if len(allxy) == 0:
        allxy = np.zeros((1, 2))
    lo = allxy.min(axis=0)
    hi = allxy.max(axis=0)
    span = max(float((hi - lo).max()), 1e-12)
    pad = 0.05 * span

    def tx(x, y):
        return (x - lo[0] + pad) / (span + 2 * pad) * size, size - (y - lo[1] + pad) / (span + 2 * pad) * size

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">', f'<rect width="{size}" height="{size}" fill="white"/>']
    for x0, y0, x1, y1 in segs:
        a, b = tx(x0, y0), tx(x1, y1)
        out.append(f'<line x1="{a[0]:.3f}" y1="{a[1]:.3f}" x2="{b[0]:.3f}" y2="{b[1]:.3f}" '
                   f'stroke="black" stroke-width="1"/>')
    if highlight is not None:
        for x0, y0, x1, y1 in np.asarray(highlight, float).reshape(-1, 4):
            a, b = tx(x0, y0), tx(x1, y1)
            out.append(f'<line x1="{a[0]:.3f}" y1="{a[1]:.3f}" x2="{b[0]:.3f}" y2="{b[1]:.3f}" '
                       f'stroke="red" stroke-width="2"/>')
    if points is not None:
        for x, y in np.asarray(points, float).reshape(-1, 2):
            a = tx(x, y)
            out.append(f'<circle cx="{a[0]:.3f}" cy="{a[1]:.3f}" r="2.5" fill="blue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def route_segments_array(route: Route, continuum: bool = True) -> np.ndarray:
    pts = route.continuum_points() if continuum else np.asarray(route.turns, float)
    return np.hstack([pts[:-1], pts[1:]])
