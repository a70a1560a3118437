"""Monte-Carlo estimators for the network statistics.

Every estimator works replicate by replicate.  A replicate at intensity
``lam`` draws a Poisson sample on a square of half-side
``(half + margin) / sqrt(lam)``, fresh invariance parameters (translation,
rotation, scale) and a fresh secondary-weight field, routes all pairs and
then measures in the central square of half-side ``half / sqrt(lam)``.

By default the lattice level is matched to the intensity,
``level = H_ref - log2(lam) / 2`` (rounded), so that for ``lam`` a power of
4 the truncated model at ``lam`` is exactly the doubling image of the model
at ``lam = 1``.  Different ``(lam, rep)`` pairs use independent seeds; all
statistics computed from one replicate share it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dyadic import ModelParams, ParameterError, PreconditionError
from .geometry import (
    Subnetwork,
    Window,
    build_E,
    disc_clipped_lengths,
    length_in_window,
    sample_poisson,
    segment_crossings,
)
from .routing import InvarianceParams, Route, RouteEngine
from .weights import hash_u64, hash_uniform


@dataclass
class StatEstimate:
    statistic: str
    value: float
    std_error: float
    n: int
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, statistic: str, samples, params: dict, **extra) -> "StatEstimate":
        x = np.asarray(list(samples), dtype=float)
        n = len(x)
        if n == 0:
            return cls(statistic, float("nan"), float("nan"), 0, params, extra)
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(statistic, float(x.mean()), se, n, params, extra)

    def as_record(self) -> dict:
        rec = {"statistic": self.statistic, "value": self.value, "std_error": self.std_error,
               "n": self.n, "params": self.params}
        if self.extra:
            rec["extra"] = self.extra
        return rec


@dataclass(frozen=True)
class WindowSpec:
    """Measurement half-side and sampling margin, in units of the point spacing lam**-1/2."""

    half: float = 1.0
    margin: float = 3.0


def _lam_key(lam) -> tuple[int, int]:
    f = Fraction(lam).limit_denominator(1 << 20)
    return f.numerator, f.denominator


def matched_level(h_ref: int, lam: float) -> int:
    return h_ref - int(round(math.log2(lam) / 2.0))


def replicate_seed(master: int, lam, rep: int, tag: int = 0) -> int:
    num, den = _lam_key(lam)
    return hash_u64(master, 9001, tag, num, den, rep)


class Replicate:
    """One realisation of the point process and its routes.

    Routes are computed lazily and cached, so several statistics can be
    read off the same realisation.
    """

    def __init__(self, lam: float, rep: int, params: ModelParams, spec: WindowSpec = WindowSpec(),
                 matched: bool = True, depth: int = 20, tag: int = 0):
        if not lam > 0:
            raise ParameterError("intensity must be positive")
        self.lam, self.rep, self.spec = lam, rep, spec
        self.seed = replicate_seed(params.master_seed, lam, rep, tag)
        level = matched_level(params.finest_level, lam) if matched else params.finest_level
        self.params = replace(params, finest_level=level)
        self.engine = RouteEngine(replace(self.params, master_seed=hash_u64(self.seed, 1)))
        self.level = level
        self.inv = InvarianceParams.from_seed(hash_u64(self.seed, 2), n=depth)
        self.frame = self.inv.frame(level)
        self.unit = lam ** -0.5
        self.sample_window = Window.square((spec.half + spec.margin) * self.unit)
        self.measure_window = Window.square(spec.half * self.unit)
        rng = np.random.default_rng(hash_u64(self.seed, 3))
        self.sample = sample_poisson(lam, self.sample_window, self.seed, rng=rng)
        pts = []
        seen = set()
        for p in self.sample.points:
            q = self.frame.to_lattice(p)
            if q not in seen:
                seen.add(q)
                pts.append(q)
        self.points = pts
        self.points_c = self.frame.to_continuum(pts) if pts else np.zeros((0, 2))
        self.origin = self.frame.to_lattice((0.0, 0.0))
        self._routes: dict = {}
        self._origin_routes: dict = {}
        self._net: Optional[Subnetwork] = None

    # -- routes ----------------------------------------------------------
    def route(self, i: int, j: int) -> Route:
        if i > j:
            i, j = j, i
        r = self._routes.get((i, j))
        if r is None:
            r = self.engine.route_units(self.points[i], self.points[j])
            r.frame = self.frame
            self._routes[(i, j)] = r
        return r

    def all_routes(self) -> list[Route]:
        n = len(self.points)
        return [self.route(i, j) for j in range(n) for i in range(j)]

    def origin_route(self, i: int) -> Optional[Route]:
        if self.points[i] == self.origin:
            return None
        r = self._origin_routes.get(i)
        if r is None:
            r = self.engine.route_units(self.origin, self.points[i])
            r.frame = self.frame
            self._origin_routes[i] = r
        return r

    def network(self) -> Subnetwork:
        if self._net is None:
            net = Subnetwork(self.level, self.frame, self.sample_window)
            for r in self.all_routes():
                net.add_route(r)
            self._net = net.normalize()
        return self._net

    def E(self, r: float) -> Subnetwork:
        return build_E(self.all_routes(), r, self.level, self.frame, self.sample_window)

    def provenance(self) -> dict:
        return {"lambda": self.lam, "H_min": self.level, "rep": self.rep, "seed": self.seed,
                "window": self.sample_window.as_list()}


def _params_record(params: ModelParams, lam, r=None, spec: WindowSpec | None = None, **more) -> dict:
    rec = {"gamma": str(params.gamma), "lambda": lam, "r": r, "H_min": params.finest_level,
           "window": None if spec is None else [spec.half, spec.margin], "seed": params.master_seed}
    rec.update(more)
    return rec


def _replicates(lam, params, n_reps, spec, matched=True, tag=0):
    for rep in range(n_reps):
        yield Replicate(lam, rep, params, spec, matched=matched, tag=tag)


# ---------------------------------------------------------------------------
# intensities


def estimate_ell(lam: float, params: ModelParams, spec: WindowSpec = WindowSpec(), n_reps: int = 10,
                 matched: bool = True, replicates: Optional[Sequence[Replicate]] = None) -> StatEstimate:
    """Edge intensity of S(lam)."""
    reps = replicates if replicates is not None else _replicates(lam, params, n_reps, spec, matched)
    vals = []
    for R in reps:
        vals.append(length_in_window(R.network(), R.measure_window) / R.measure_window.area)
    return StatEstimate.from_samples("ell", vals, _params_record(params, lam, None, spec, matched=matched))


def estimate_p(lam: float, r: float, params: ModelParams, spec: WindowSpec = WindowSpec(), n_reps: int = 10,
               matched: bool = True, replicates: Optional[Sequence[Replicate]] = None) -> StatEstimate:
    """Edge intensity of E(lam, r)."""
    reps = replicates if replicates is not None else _replicates(lam, params, n_reps, spec, matched)
    vals = []
    for R in reps:
        vals.append(length_in_window(R.E(r), R.measure_window) / R.measure_window.area)
    return StatEstimate.from_samples("p", vals, _params_record(params, lam, r, spec, matched=matched))


def p_table(lam: float, r_grid: Sequence[float], replicates: Sequence[Replicate], params: ModelParams,
            spec: WindowSpec) -> list[StatEstimate]:
    """p(lam, r) over an r-grid from common replicates."""
    vals = {r: [] for r in r_grid}
    for R in replicates:
        for r in r_grid:
            vals[r].append(length_in_window(R.E(r), R.measure_window) / R.measure_window.area)
    return [StatEstimate.from_samples("p", vals[r], _params_record(params, lam, r, spec)) for r in r_grid]


def doubly_infinite_diagnostic(lam: float, r_grid: Sequence[float], params: ModelParams,
                               spec: WindowSpec = WindowSpec(), n_reps: int = 6) -> list[StatEstimate]:
    """p(lam, r) on an increasing r-grid (should decrease towards 0)."""
    reps = list(_replicates(lam, params, n_reps, spec))
    return p_table(lam, sorted(r_grid), reps, params, spec)


# ---------------------------------------------------------------------------
# crossings and angles


def _chord(center, radius, phi, offset):
    d = np.array([math.cos(phi), math.sin(phi)])
    nrm = np.array([-d[1], d[0]])
    half = math.sqrt(max(radius * radius - offset * offset, 0.0))
    c = np.asarray(center, float) + offset * nrm
    return c - half * d, c + half * d, 2.0 * half


def crossing_rate_samples(R: Replicate, n_lines: int = 64) -> tuple[float, float]:
    """(crossings per unit chord length, edge intensity) in the measurement disc of one replicate.

    Chords are isotropic uniform random chords of the disc inscribed in the
    measurement window (stratified orientations, uniform offsets).  For any
    fixed network the expected crossing count over the expected chord length
    equals (2/pi) times the length density in the disc; dividing by the
    expected chord length pi * rho / 2 keeps the estimate unbiased.
    """
    win = R.measure_window
    rho = 0.5 * (win.x1 - win.x0)
    center = (0.5 * (win.x0 + win.x1), 0.5 * (win.y0 + win.y1))
    seg = R.network().continuum_segments()
    iota = float(disc_clipped_lengths(seg, center, rho).sum()) / (math.pi * rho * rho)
    u0 = hash_uniform(R.seed, 31)
    total_cross = 0
    for k in range(n_lines):
        phi = math.pi * (k + u0) / n_lines
        off = (2.0 * hash_uniform(R.seed, 32, k) - 1.0) * rho
        p0, p1, L = _chord(center, rho, phi, off)
        if L > 0:
            total_cross += len(segment_crossings(seg, p0, p1))
    return total_cross / (n_lines * math.pi * rho / 2.0), iota


def crossing_identity(replicates: Sequence[Replicate], n_lines: int = 64) -> dict:
    """Crossing rate against (2/pi) * intensity, with paired per-replicate differences."""
    rates, iotas = [], []
    for R in replicates:
        a, b = crossing_rate_samples(R, n_lines)
        rates.append(a)
        iotas.append(b)
    rates, iotas = np.asarray(rates), np.asarray(iotas)
    diff = rates - 2.0 / math.pi * iotas
    n = len(diff)
    return {
        "rate": float(rates.mean()), "rate_se": float(rates.std(ddof=1) / math.sqrt(n)),
        "iota": float(iotas.mean()), "iota_se": float(iotas.std(ddof=1) / math.sqrt(n)),
        "predicted": float(2.0 / math.pi * iotas.mean()),
        "diff": float(diff.mean()), "diff_se": float(diff.std(ddof=1) / math.sqrt(n)), "n": n,
    }


def palm_crossing_angles(replicates: Sequence[Replicate], n_angles: int, seed: int) -> np.ndarray:
    """Independent draws from the crossing-angle law of the isotropised networks.

    Each draw picks a replicate, rotates its lattice network by a fresh
    uniform angle (equivalently, draws an isotropic uniform random chord of
    the measurement disc in the lattice frame), accepts the chord with
    probability ``N / N_max`` where ``N`` is its number of crossings, and
    then returns the angle of one crossing chosen uniformly.  ``N_max`` is
    the number of distinct lattice lines meeting the disc, which bounds
    ``N`` because a chord crosses each lattice line at most once.
    """
    rng = np.random.default_rng(seed)
    pools = []
    for R in replicates:
        win = R.measure_window
        rho_c = 0.5 * (win.x1 - win.x0)
        center = _lattice_center(R, (0.5 * (win.x0 + win.x1), 0.5 * (win.y0 + win.y1)))
        rho = _lattice_radius(R, rho_c)
        seg = R.network().segments()
        near = ((np.minimum(seg[:, 0], seg[:, 2]) <= center[0] + rho) & (np.maximum(seg[:, 0], seg[:, 2]) >= center[0] - rho)
                & (np.minimum(seg[:, 1], seg[:, 3]) <= center[1] + rho) & (np.maximum(seg[:, 1], seg[:, 3]) >= center[1] - rho))
        seg = seg[near]
        horiz = seg[:, 1] == seg[:, 3]
        cap = len(np.unique(seg[horiz, 1])) + len(np.unique(seg[~horiz, 0]))
        if cap:
            pools.append((seg, center, rho, cap))
    if not pools:
        raise PreconditionError("no network near the measurement windows")
    out = []
    while len(out) < n_angles:
        seg, center, rho, cap = pools[rng.integers(len(pools))]
        phi = rng.uniform(0.0, math.pi)
        off = rng.uniform(-rho, rho)
        p0, p1, L = _chord(center, rho, phi, off)
        if L <= 0:
            continue
        cr = segment_crossings(seg, p0, p1)
        if len(cr) > cap:
            raise AssertionError("crossing bound violated")
        if cr and rng.uniform() * cap < len(cr):
            out.append(cr[rng.integers(len(cr))].angle)
    return np.asarray(out)


def angle_cdf(x):
    """Distribution function of the density sin(t)/2 on (0, pi)."""
    return (1.0 - np.cos(x)) / 2.0


# ---------------------------------------------------------------------------
# D1


def estimate_D1(params: ModelParams, n_samples: int, depth: int = 20) -> StatEstimate:
    """Route length between random unit-separated points under random invariance parameters.

    Each sample is normalised by the separation of the snapped endpoints so
    that every ratio is at least 1 exactly.
    """
    if n_samples < 2:
        raise ParameterError("need at least two samples")
    engine = RouteEngine(params)
    vals = []
    for k in range(n_samples):
        s = hash_u64(params.master_seed, 4242, k)
        inv = InvarianceParams.from_seed(s, n=depth)
        z1 = (hash_uniform(s, 1), hash_uniform(s, 2))
        phi = 2 * math.pi * hash_uniform(s, 3)
        z2 = (z1[0] + math.cos(phi), z1[1] + math.sin(phi))
        fr = inv.frame(engine.level)
        a, b = fr.to_lattice(z1), fr.to_lattice(z2)
        r = engine.route_units(a, b)
        sep = math.hypot(b[0] - a[0], b[1] - a[1])
        vals.append(r.length_units / sep)
    est = StatEstimate.from_samples("d1", vals, _params_record(params, 1.0, depth=depth))
    est.extra["max_ratio"] = float(max(vals))
    est.extra["min_ratio"] = float(min(vals))
    return est


# ---------------------------------------------------------------------------
# marginal length, circle crossings, geodesics, branchpoints


def marginal_length_samples(R: Replicate) -> float:
    """Length added to S by adjoining the origin and its routes to every sample point."""
    base = R.network()
    added = Subnetwork(R.level, R.frame)
    for i in range(len(R.points)):
        rt = R.origin_route(i)
        if rt is not None:
            added.add_route(rt)
    union = base.union(added.normalize())
    return math.ldexp(float(union.edge_count - base.edge_count), R.level) / R.frame.scale


def marginal_length_experiment(params: ModelParams, lam: float = 1.0, n_reps: int = 10,
                               spec: WindowSpec = WindowSpec(),
                               replicates: Optional[Sequence[Replicate]] = None) -> dict:
    """Mean added length against half the edge intensity, from common replicates."""
    reps = list(replicates) if replicates is not None else list(_replicates(lam, params, n_reps, spec))
    L = [marginal_length_samples(R) for R in reps]
    ell = [length_in_window(R.network(), R.measure_window) / R.measure_window.area for R in reps]
    EL = StatEstimate.from_samples("marginal", L, _params_record(params, lam, None, spec))
    ell_est = StatEstimate.from_samples("ell", ell, _params_record(params, lam, None, spec))
    ratio = EL.value / (ell_est.value / 2.0)
    # delta-method standard error of the ratio of means from paired samples
    x, y = np.asarray(L), np.asarray(ell) / 2.0
    n = len(x)
    d = x / y.mean() - ratio * y / y.mean()
    ratio_se = float(d.std(ddof=1) / math.sqrt(n))
    return {"EL": EL, "ell": ell_est, "ratio": ratio, "ratio_se": ratio_se}


def _circle_hits(route: Route, center, radius: float):
    """Crossing points of a lattice route with a circle (lattice frame), in route order.

    Each hit is returned with an exact identity key (axis, line, sign) so
    that hits on shared segments deduplicate exactly.
    """
    cx, cy = center
    R2 = radius * radius
    hits = []
    for a, b in route.segments():
        horiz = a[1] == b[1]
        line, off, lo_c, along0, along1 = (a[1], cy, cx, a[0], b[0]) if horiz else (a[0], cx, cy, a[1], b[1])
        d2 = R2 - (line - off) ** 2
        if d2 < 0:
            continue
        w = math.sqrt(d2)
        cand = [(lo_c - w, -1), (lo_c + w, 1)]
        lo, hi = min(along0, along1), max(along0, along1)
        ts = [(t, s) for t, s in cand if lo <= t <= hi]
        ts.sort(key=lambda ts_: (ts_[0] - along0) * (1 if along1 >= along0 else -1))
        for t, s in ts:
            hits.append(((0 if horiz else 1, line, s), (t, line) if horiz else (line, t)))
    return hits


def _lattice_radius(R: Replicate, r: float) -> float:
    return r * R.frame.scale / math.ldexp(1.0, R.level)


def _lattice_center(R: Replicate, z=(0.0, 0.0)):
    x, y = float(z[0]) * R.frame.scale, float(z[1]) * R.frame.scale
    c, s = math.cos(R.frame.angle), math.sin(R.frame.angle)
    f = math.ldexp(1.0, -R.level)
    return (c * x + s * y) * f + R.frame.shift[0], (-s * x + c * y) * f + R.frame.shift[1]


def circle_crossing_count(R: Replicate, r: float, radius: float = 1.0) -> int:
    """Distinct points where routes from inside disc(0, 1-r) to outside disc(0, 1+r) cross the unit circle."""
    if not 0 < r < radius:
        raise ParameterError("need 0 < r < 1")
    dist = np.hypot(R.points_c[:, 0], R.points_c[:, 1]) if len(R.points) else np.zeros(0)
    inner = [i for i in range(len(R.points)) if dist[i] < radius - r]
    outer = [i for i in range(len(R.points)) if dist[i] > radius + r]
    center = _lattice_center(R)
    rad = _lattice_radius(R, radius)
    keys = set()
    for i in inner:
        for j in outer:
            for key, _ in _circle_hits(R.route(i, j), center, rad):
                keys.add(key)
    return len(keys)


def geodesic_counts(R: Replicate, r_grid: Sequence[float]) -> dict:
    """For each r, distinct first-crossing points of circle(0, r) over routes R(0, xi), |xi| > r."""
    dist = np.hypot(R.points_c[:, 0], R.points_c[:, 1]) if len(R.points) else np.zeros(0)
    center = _lattice_center(R)
    out = {}
    for r in r_grid:
        rad = _lattice_radius(R, r)
        keys = set()
        for i in range(len(R.points)):
            if dist[i] <= r:
                continue
            rt = R.origin_route(i)
            if rt is None:
                continue
            k = _first_exit_from(rt, center, rad)
            if k is not None:
                keys.add(k)
        out[r] = len(keys)
    return out


def _first_exit_from(route: Route, center, rad):
    # routes from the origin start at the snapped origin; the first crossing
    # of the circle along the route is its first exit
    hits = _circle_hits(route, center, rad)
    return hits[0][0] if hits else None


def geodesic_statistics(lam: float, r_grid: Sequence[float], params: ModelParams,
                        spec: WindowSpec = WindowSpec(), n_reps: int = 10,
                        replicates: Optional[Sequence[Replicate]] = None) -> list[StatEstimate]:
    """q(lam, r): mean number of distinct first crossings of circle(0, r) by routes from 0."""
    reps = list(replicates) if replicates is not None else list(_replicates(lam, params, n_reps, spec))
    vals = {r: [] for r in r_grid}
    for R in reps:
        c = geodesic_counts(R, r_grid)
        for r in r_grid:
            vals[r].append(c[r])
    return [StatEstimate.from_samples("q", vals[r], _params_record(params, lam, r, spec)) for r in r_grid]


def branchpoint_event(R: Replicate, eps: float, B: float) -> bool:
    """Whether routes from Xi ∩ disc(0, eps) to Xi outside disc(0, B) fail to share their first exit from disc(0, 1)."""
    dist = np.hypot(R.points_c[:, 0], R.points_c[:, 1]) if len(R.points) else np.zeros(0)
    src = [i for i in range(len(R.points)) if dist[i] < eps]
    dst = [j for j in range(len(R.points)) if dist[j] > B]
    center = _lattice_center(R)
    rad = _lattice_radius(R, 1.0)
    exits = set()
    for i in src:
        for j in dst:
            rt = R.route(i, j)
            if rt.turns[0] != R.points[i]:
                rt = rt.reversed()
            hits = _circle_hits(rt, center, rad)
            exits.add(hits[0][0] if hits else None)
            if len(exits) > 1:
                return True
    return False


def psi_event(R: Replicate, eta: float, delta: float) -> bool:
    """Whether the sub-routes between disc(0, delta) and disc(1, delta) of routes between
    Xi ∩ disc(0, eta) and Xi ∩ disc(1, eta) are not all identical."""
    pc = R.points_c
    if len(pc) == 0:
        return False
    d0 = np.hypot(pc[:, 0], pc[:, 1])
    d1 = np.hypot(pc[:, 0] - 1.0, pc[:, 1])
    src = [i for i in range(len(pc)) if d0[i] < eta]
    dst = [j for j in range(len(pc)) if d1[j] < eta]
    c0 = _lattice_center(R, (0.0, 0.0))
    c1 = _lattice_center(R, (1.0, 0.0))
    rad = _lattice_radius(R, delta)
    subs = set()
    for i in src:
        for j in dst:
            rt = R.route(i, j)
            if rt.turns[0] != R.points[i]:
                rt = rt.reversed()
            subs.add(_middle_part(rt, c0, c1, rad))
            if len(subs) > 1:
                return True
    return False


def _middle_part(rt: Route, c0, c1, rad):
    """Polyline between the first exit from disc(c0) and the last entrance into disc(c1)."""
    pts = [tuple(map(float, p)) for p in rt.turns]
    # dense parametrisation by segments; find crossing parameters exactly per segment
    first = None
    last = None
    acc = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        L = abs(b[0] - a[0]) + abs(b[1] - a[1])
        for c, which in ((c0, 0), (c1, 1)):
            for t in _segment_circle_params(a, b, c, rad):
                s = acc + t * L
                if which == 0 and (first is None or s > first):
                    first = s if _outside_after(a, b, t, c, rad) else first
                if which == 1 and _inside_after(a, b, t, c, rad) and (last is None or s > last):
                    last = s
        acc += L
    return (round(first, 9) if first is not None else None, round(last, 9) if last is not None else None,
            _cut(pts, first, last))


def _segment_circle_params(a, b, c, rad):
    dx, dy = b[0] - a[0], b[1] - a[1]
    fx, fy = a[0] - c[0], a[1] - c[1]
    A = dx * dx + dy * dy
    Bq = 2 * (fx * dx + fy * dy)
    C = fx * fx + fy * fy - rad * rad
    disc = Bq * Bq - 4 * A * C
    if A == 0 or disc < 0:
        return []
    sq = math.sqrt(disc)
    return [t for t in ((-Bq - sq) / (2 * A), (-Bq + sq) / (2 * A)) if 0 <= t <= 1]


def _outside_after(a, b, t, c, rad):
    t2 = min(1.0, t + 1e-9)
    x, y = a[0] + t2 * (b[0] - a[0]), a[1] + t2 * (b[1] - a[1])
    return math.hypot(x - c[0], y - c[1]) >= rad


def _inside_after(a, b, t, c, rad):
    return not _outside_after(a, b, t, c, rad)


def _cut(pts, s0, s1):
    if s0 is None or s1 is None or s1 <= s0:
        return None
    out = []
    acc = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        L = abs(b[0] - a[0]) + abs(b[1] - a[1])
        lo, hi = max(acc, s0), min(acc + L, s1)
        if hi > lo:
            p = (a[0] + (lo - acc) / L * (b[0] - a[0]), a[1] + (lo - acc) / L * (b[1] - a[1]))
            q = (a[0] + (hi - acc) / L * (b[0] - a[0]), a[1] + (hi - acc) / L * (b[1] - a[1]))
            out.append((round(p[0], 6), round(p[1], 6), round(q[0], 6), round(q[1], 6)))
        acc += L
    return tuple(out)


def branchpoint_statistics(lam: float, params: ModelParams, eps_grid=(0.25,), B_grid=(2.0,),
                           eta_delta=(), spec: WindowSpec = WindowSpec(), n_reps: int = 10,
                           replicates: Optional[Sequence[Replicate]] = None) -> list[StatEstimate]:
    """Empirical Q(lam, eps, B) over a grid, and Psi(lam, eta, delta) for given pairs."""
    reps = list(replicates) if replicates is not None else list(_replicates(lam, params, n_reps, spec))
    out = []
    for eps in eps_grid:
        for B in B_grid:
            vals = [float(branchpoint_event(R, eps, B)) for R in reps]
            out.append(StatEstimate.from_samples("branch_Q", vals,
                                                 _params_record(params, lam, None, spec, eps=eps, B=B)))
    for eta, delta in eta_delta:
        vals = [float(psi_event(R, eta, delta)) for R in reps]
        out.append(StatEstimate.from_samples("branch_Psi", vals,
                                             _params_record(params, lam, None, spec, eta=eta, delta=delta)))
    return out


# ---------------------------------------------------------------------------
# jaggedness


def straight_start_length(R: Replicate, r: float) -> float:
    """Total length of initial straight runs of length >= r from sample points in the measurement window."""
    win = R.measure_window
    Rl = _lattice_radius(R, r)
    total = 0.0
    n = len(R.points)
    for i in range(n):
        x, y = R.points_c[i]
        if not (win.x0 <= x <= win.x1 and win.y0 <= y <= win.y1):
            continue
        dirs = set()
        for j in range(n):
            if j == i:
                continue
            rt = R.route(i, j)
            t = rt.turns if rt.turns[0] == R.points[i] else tuple(reversed(rt.turns))
            a, b = t[0], t[1]
            run = abs(b[0] - a[0]) + abs(b[1] - a[1])
            if run >= Rl:
                dirs.add(((b[0] > a[0]) - (b[0] < a[0]), (b[1] > a[1]) - (b[1] < a[1])))
        total += len(dirs) * r
    return total


def jaggedness_diagnostic(lam: float, r_grid: Sequence[float], params: ModelParams,
                          spec: WindowSpec = WindowSpec(), n_reps: int = 6, matched: bool = True,
                          replicates: Optional[Sequence[Replicate]] = None) -> list[StatEstimate]:
    """iota(lam, r): intensity of initial straight runs of length >= r."""
    reps = list(replicates) if replicates is not None else list(_replicates(lam, params, n_reps, spec, matched))
    vals = {r: [] for r in r_grid}
    for R in reps:
        for r in r_grid:
            vals[r].append(straight_start_length(R, r) / R.measure_window.area)
    return [StatEstimate.from_samples("iota", vals[r], _params_record(params, lam, r, spec, matched=matched))
            for r in r_grid]


def collapse_check(a: StatEstimate, b: StatEstimate, factor: float = 1.0, k: float = 3.0) -> dict:
    """Compare ``a`` with ``factor * b``; pass if within ``k`` combined standard errors."""
    diff = a.value - factor * b.value
    se = math.hypot(a.std_error, factor * b.std_error)
    return {"diff": diff, "se": se, "z": diff / se if se > 0 else float("inf"), "pass": abs(diff) <= k * se}


# ---------------------------------------------------------------------------
# suite runner


@dataclass(frozen=True)
class SuiteConfig:
    """Configuration of the scaling and identity suite.

    ``s_grid`` lists reduced radii ``r * sqrt(lam)``; each rung ``lam``
    evaluates p and q at ``r = s / sqrt(lam)`` so that the collapses compare
    like with like.
    """

    lams: tuple = (0.25, 1.0, 4.0)
    s_grid: tuple = (0.5, 1.0, 2.0)
    n_reps: int = 40
    half: float = 1.5
    margin: float = 2.0
    n_radius: float = 0.5
    angles_per_rep: int = 250
    branch_eps: tuple = (0.25, 0.5)
    branch_B: tuple = (1.5, 2.5)
    identity_lam: float = 1.0
    workers: int = 1


def replicate_summary(lam: float, rep: int, params: ModelParams, cfg: SuiteConfig) -> dict:
    """All per-replicate statistics used by the suite, as plain numbers."""
    spec = WindowSpec(cfg.half, cfg.margin)
    R = Replicate(lam, rep, params, spec)
    area = R.measure_window.area
    root = math.sqrt(lam)
    out = {"lambda": lam, "rep": rep, "seed": R.seed, "H_min": R.level, "n_points": len(R.points),
           "ell": length_in_window(R.network(), R.measure_window) / area}
    out["p"] = {s: length_in_window(R.E(s / root), R.measure_window) / area for s in cfg.s_grid}
    q = geodesic_counts(R, [s / root for s in cfg.s_grid])
    out["q"] = {s: q[s / root] for s in cfg.s_grid}
    if lam == cfg.identity_lam:
        out["marginal"] = marginal_length_samples(R)
        out["N"] = circle_crossing_count(R, cfg.n_radius)
        out["p1_same"] = length_in_window(R.E(1.0), R.measure_window) / area
        rate, iota = crossing_rate_samples(R)
        out["rate"], out["iota"] = rate, iota
        out["angles"] = palm_crossing_angles([R], cfg.angles_per_rep, hash_u64(R.seed, 77)).tolist()
        out["branch_Q"] = {f"{e},{b}": float(branchpoint_event(R, e, b)) for e in cfg.branch_eps for b in cfg.branch_B}
    return out


def _summary_task(args):
    return replicate_summary(*args)


def run_suite(params: ModelParams, cfg: SuiteConfig) -> list[dict]:
    """Per-replicate summaries for every (lam, rep), in a fixed order independent of ``workers``."""
    tasks = [(lam, rep, params, cfg) for lam in cfg.lams for rep in range(cfg.n_reps)]
    if cfg.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(_summary_task, tasks))
    return [replicate_summary(*t) for t in tasks]


def aggregate_suite(rows: list[dict], params: ModelParams, cfg: SuiteConfig) -> dict:
    """Estimates and collapse / identity checks from per-replicate summaries."""
    by = {lam: [r for r in rows if r["lambda"] == lam] for lam in cfg.lams}
    rec = lambda lam, r=None, **k: _params_record(params, lam, r, WindowSpec(cfg.half, cfg.margin), **k)
    est = {"ell": {}, "p": {}, "q": {}}
    for lam, rs in by.items():
        root = math.sqrt(lam)
        est["ell"][lam] = StatEstimate.from_samples("ell", [r["ell"] for r in rs], rec(lam))
        for s in cfg.s_grid:
            est["p"][(lam, s)] = StatEstimate.from_samples("p", [r["p"][s] for r in rs], rec(lam, s / root))
            est["q"][(lam, s)] = StatEstimate.from_samples("q", [r["q"][s] for r in rs], rec(lam, s / root))
    base = cfg.identity_lam
    checks = {}
    checks["ell_collapse"] = {
        lam: collapse_check(est["ell"][lam], est["ell"][base], factor=math.sqrt(lam / base)) for lam in cfg.lams}
    checks["p_collapse"] = {
        f"{lam},{s}": collapse_check(est["p"][(lam, s)], est["p"][(base, s)], factor=math.sqrt(lam / base))
        for lam in cfg.lams for s in cfg.s_grid}
    checks["q_collapse"] = {
        f"{lam},{s}": collapse_check(est["q"][(lam, s)], est["q"][(base, s)]) for lam in cfg.lams for s in cfg.s_grid}
    rel = [e.std_error / abs(e.value) for e in
           list(est["ell"].values()) + list(est["p"].values()) + list(est["q"].values())]
    checks["max_rel_se"] = max(rel)
    ident = [r for r in by[base]]
    if ident and "marginal" in ident[0]:
        n = len(ident)
        L = np.array([r["marginal"] for r in ident])
        ell = np.array([r["ell"] for r in ident])
        ratio = L.mean() / (ell.mean() / 2.0)
        d = L / (ell.mean() / 2.0) - ratio * ell / ell.mean()
        checks["marginal"] = {"ratio": float(ratio), "se": float(d.std(ddof=1) / math.sqrt(n)),
                              "EL": float(L.mean()), "ell": float(ell.mean())}
        rate = np.array([r["rate"] for r in ident])
        iota = np.array([r["iota"] for r in ident])
        diff = rate - 2.0 / math.pi * iota
        checks["crossing"] = {"rate": float(rate.mean()), "predicted": float(2 / math.pi * iota.mean()),
                              "diff": float(diff.mean()), "se": float(diff.std(ddof=1) / math.sqrt(n))}
        from scipy.stats import kstest
        ang = np.concatenate([np.asarray(r["angles"]) for r in ident])
        ks = kstest(ang, angle_cdf)
        checks["angles"] = {"n": int(len(ang)), "ks_stat": float(ks.statistic), "p_value": float(ks.pvalue)}
        # largest rung gives the best (lower) approximation of the limit p(1)
        top = max(cfg.lams)
        p1 = est["p"][(top, math.sqrt(top))] if math.sqrt(top) in cfg.s_grid else None
        if p1 is not None:
            e = est["ell"][base]
            checks["ell_vs_p"] = {"ell": e.value, "ell_se": e.std_error, "p1": p1.value, "p1_se": p1.std_error,
                                  "lam_p1": top}
        Nv = np.array([r["N"] for r in ident], float)
        p1s = np.array([r["p1_same"] for r in ident])
        bound = 4.0 * p1s / cfg.n_radius
        checks["N_bound"] = {"N": float(Nv.mean()), "N_se": float(Nv.std(ddof=1) / math.sqrt(n)),
                             "bound": float(bound.mean()), "diff_se": float((Nv - bound).std(ddof=1) / math.sqrt(n)),
                             "r": cfg.n_radius}
        checks["branch_Q"] = {k: float(np.mean([r["branch_Q"][k] for r in ident])) for k in ident[0]["branch_Q"]}
    return {"estimates": {k: {str(kk): v.as_record() for kk, v in d.items()} for k, d in est.items()},
            "checks": checks}
