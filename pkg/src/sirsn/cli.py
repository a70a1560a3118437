"""Command-line experiment runner.

Every command is fully determined by its flags (or a JSON config file with
the same keys) and writes its outputs atomically into the output directory.
The ``SIRSN_OUT`` environment variable overrides the configured output
directory; nothing else is read from the environment.

Exit codes: 0 success, 1 verification failure, 2 usage or parameter error,
3 resource limit.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .dyadic import ModelParams, ParameterError, PreconditionError, ResourceLimitError, SirsnError, parse_gamma

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
OUT_ENV = "SIRSN_OUT"
STATS = ("ell", "p", "d1", "marginal", "q", "branch", "iota")
SUITES = ("lemmas", "figure6", "box", "transit", "bounds")


class UsageError(SirsnError):
    """Invalid combination of command-line arguments."""


# ---------------------------------------------------------------------------
# output helpers


def clean(obj):
    """Convert to JSON-ready values: exact rationals as strings, NaN as null, tuples as lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, Fraction):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([clean(v) for v in r])
    return buf.getvalue()


def parse_point(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"expected x,y but got {text!r}")
    try:
        return tuple(Fraction(p.strip()) for p in parts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_list(text, kind=float) -> list:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [kind(v) for v in text]
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    try:
        return [kind(Fraction(t)) if kind is float else kind(t) for t in items]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sirsn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file whose keys mirror the long flags")
    p.add_argument("--out", help="output directory (overridden by $SIRSN_OUT)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sub = p.add_subparsers(dest="command", required=True)
    p.subparsers = {}

    def model(sp):
        sp.add_argument("--gamma", default="3/4", help="cost parameter as an exact rational")
        sp.add_argument("--hmin", type=int, default=-4, help="finest lattice level")
        sp.add_argument("--seed", type=int, default=0, help="master seed")

    r = p.subparsers["route"] = sub.add_parser("route", help="route between two points")
    model(r)
    r.add_argument("--from", dest="z1", required=True, help="x,y (dyadic rationals; reals with --invariance)")
    r.add_argument("--to", dest="z2", required=True)
    r.add_argument("--invariance", type=int, default=None,
                   help="seed of random rotation/scale/translation; endpoints are then continuum points")
    r.add_argument("--depth", type=int, default=20, help="translation depth n for --invariance")
    r.add_argument("--svg", action="store_true")

    s = p.subparsers["stats"] = sub.add_parser("stats", help="Monte-Carlo estimates on a grid")
    model(s)
    s.add_argument("--stat", choices=STATS, required=True)
    s.add_argument("--lambda", dest="lams", default="1", help="comma-separated intensities")
    s.add_argument("--r", dest="radii", default="1", help="comma-separated radii (p, q, iota)")
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--half", type=float, default=1.5)
    s.add_argument("--margin", type=float, default=2.0)
    s.add_argument("--eps", default="0.25", help="branchpoint eps grid")
    s.add_argument("--B", dest="B", default="2.0", help="branchpoint B grid")

    v = p.subparsers["verify"] = sub.add_parser("verify", help="exact and Monte-Carlo verification suites")
    model(v)
    v.add_argument("--suite", choices=SUITES + ("all",), required=True)
    v.add_argument("--trials", type=int, default=None, help="trial budget (suite-specific default)")
    v.add_argument("--hmax", type=int, default=12, help="largest h tried by the figure6 suite")
    v.add_argument("--lam", type=float, default=1.0, help="intensity for the transit suite")
    v.add_argument("--h", type=float, default=0.25, help="grid spacing for the transit suite")

    t = p.subparsers["transit"] = sub.add_parser("transit", help="transit-node audit table, cost model and rendering")
    model(t)
    t.add_argument("--lam", type=float, default=1.0)
    t.add_argument("--h", type=float, default=0.25)
    t.add_argument("--rep", type=int, default=0)
    t.add_argument("--pairs", type=int, default=80)
    t.add_argument("--M", type=float, default=1000.0)
    t.add_argument("--c1", type=float, default=1.0)
    t.add_argument("--c2", type=float, default=1e-3)
    t.add_argument("--K", type=float, default=1.0, help="search-cost constant of the cost model")

    a = p.subparsers["alt"] = sub.add_parser("alt", help="line-process and dynamic Gabriel models")
    a.add_argument("--model", choices=("lines", "gabriel"), required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--half", type=float, default=2.0)
    a.add_argument("--rate", type=float, default=1.0, help="line rate or point intensity")
    a.add_argument("--gamma", type=float, default=3.0, help="mark exponent of the line process")
    a.add_argument("--gamma-g", dest="gamma_g", type=float, default=0.0, help="speed exponent of the Gabriel model")
    a.add_argument("--vmin", type=float, default=1.0)
    a.add_argument("--vmax", type=float, default=10.0)
    a.add_argument("--queries", type=int, default=20)
    return p


CONFIG_ALIASES = {"from": "z1", "to": "z2", "lambda": "lams", "r": "radii"}


def parse_args(argv) -> argparse.Namespace:
    """Parse flags; a JSON config supplies defaults that explicit flags override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser = build_parser()
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a JSON object")
        cfg = {CONFIG_ALIASES.get(k.replace("-", "_"), k.replace("-", "_")): v for k, v in cfg.items()}
        top = {k: cfg.pop(k) for k in ("out", "workers") if k in cfg}
        parser.set_defaults(**top)
        cmd = next((t for t in argv if t in parser.subparsers), cfg.pop("command", None))
        cfg.pop("command", None)
        if cmd is None:
            parser.error("no command given")
        sp = parser.subparsers[cmd]
        dests = {act.dest: act for act in sp._actions}
        for key in cfg:
            if key not in dests:
                parser.error(f"unknown config key {key!r} for {cmd}")
            dests[key].required = False
        sp.set_defaults(**cfg)
        if cmd not in argv:
            argv = list(argv) + [cmd]
    return parser.parse_args(argv)


def out_dir(args) -> Path:
    return Path(os.environ.get(OUT_ENV) or args.out or "sirsn_out")


def model_params(args) -> ModelParams:
    return ModelParams(gamma=parse_gamma(str(args.gamma)), finest_level=int(args.hmin), master_seed=int(args.seed))


# ---------------------------------------------------------------------------
# commands


def cmd_route(args) -> int:
    from .geometry import to_svg
    from .routing import InvarianceParams, RouteEngine, continuum_route
    params = model_params(args)
    z1, z2 = parse_point(args.z1), parse_point(args.z2)
    if z1 == z2:
        raise UsageError("--from and --to coincide")
    engine = RouteEngine(params)
    if args.invariance is None:
        route = engine.route(z1, z2)
    else:
        inv = InvarianceParams.from_seed(int(args.invariance), n=int(args.depth))
        route = continuum_route(tuple(map(float, z1)), tuple(map(float, z2)), inv, engine)
    rec = route.as_dict()
    rec["cost_value"] = route.cost.evaluate(params.gamma)
    rec["params"] = {"gamma": str(params.gamma), "H_min": params.finest_level, "seed": params.master_seed,
                     "invariance": args.invariance}
    out = out_dir(args)
    text = dumps(rec)
    write_atomic(out / "route.json", text)
    if args.svg:
        seg = route.continuum_points()
        segs = np.column_stack([seg[:-1], seg[1:]])
        write_atomic(out / "route.svg", to_svg(segs, seg[[0, -1]]))
    sys.stdout.write(text)
    return EXIT_OK


def _stat_task(task):
    stat, lam, rep, params, half, margin, radii, eps, B = task
    from .geometry import length_in_window
    from .stats import (Replicate, WindowSpec, branchpoint_event, geodesic_counts, marginal_length_samples,
                        straight_start_length)
    R = Replicate(lam, rep, params, WindowSpec(half, margin))
    area = R.measure_window.area
    if stat == "ell":
        return {None: length_in_window(R.network(), R.measure_window) / area}
    if stat == "p":
        return {r: length_in_window(R.E(r), R.measure_window) / area for r in radii}
    if stat == "q":
        return dict(geodesic_counts(R, radii))
    if stat == "iota":
        return {r: straight_start_length(R, r) / area for r in radii}
    if stat == "marginal":
        return {"EL": marginal_length_samples(R), "ell": length_in_window(R.network(), R.measure_window) / area}
    if stat == "branch":
        return {(e, b): float(branchpoint_event(R, e, b)) for e in eps for b in B}
    raise UsageError(f"unknown statistic {stat}")


def _map(fn, tasks, workers: int):
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_stats(args) -> int:
    from .stats import StatEstimate, estimate_D1
    params = model_params(args)
    lams = parse_list(args.lams)
    radii = parse_list(args.radii)
    if not lams or (args.stat in ("p", "q", "iota") and not radii):
        raise UsageError("empty grid")
    if any(not v > 0 for v in lams + radii) or args.reps < 2:
        raise UsageError("intensities and radii must be positive and --reps at least 2")
    eps, B = parse_list(args.eps), parse_list(args.B)
    records = []
    if args.stat == "d1":
        records.append(estimate_D1(params, args.reps).as_record())
    else:
        for lam in lams:
            tasks = [(args.stat, lam, rep, params, args.half, args.margin, radii, eps, B) for rep in range(args.reps)]
            rows = _map(_stat_task, tasks, args.workers)
            for key in rows[0]:
                prov = {"gamma": str(params.gamma), "lambda": lam, "H_min": params.finest_level,
                        "seed": params.master_seed, "window": [args.half, args.margin], "reps": args.reps}
                if args.stat in ("p", "q", "iota"):
                    prov["r"] = key
                elif args.stat == "branch":
                    prov["eps"], prov["B"] = key
                name = args.stat if args.stat != "marginal" else key
                records.append(StatEstimate.from_samples(name, [r[key] for r in rows], prov).as_record())
    out = out_dir(args)
    text = dumps({"statistic": args.stat, "records": records})
    write_atomic(out / f"stats_{args.stat}.json", text)
    header = ["statistic", "lambda", "r", "value", "std_error", "n"]
    write_atomic(out / f"stats_{args.stat}.csv", rows_to_csv(
        header, [[r["statistic"], r["params"].get("lambda"), r["params"].get("r"), r["value"], r["std_error"], r["n"]]
                 for r in records]))
    sys.stdout.write(text)
    return EXIT_OK


def run_verify_suite(suite: str, params: ModelParams, args) -> dict:
    """One verification suite as a JSON-ready dict with an overall ``ok`` flag."""
    from . import bounds, checks
    if suite == "lemmas":
        res = checks.lemma_suite(params, n_pairs=args.trials or 1000)
        ok = all(v["ok"] for k, v in res.items() if isinstance(v, dict))
        return {"suite": suite, "ok": ok, "reports": res}
    if suite == "figure6":
        h, reps = checks.search_figure6(params.gamma, range(2, args.hmax + 1))
        out = {"suite": suite, "ok": h is not None, "h": h, "reports": reps}
        if h is not None:
            eta = Fraction(1, 2 ** h) * (1 / params.gamma - 1)
            out["eta"] = str(eta)
        return out
    if suite == "box":
        trials = args.trials or 10_000
        b, reps = checks.extract_b(trials)
        rad = checks.radius_suite(b, trials)
        return {"suite": suite, "ok": rad.ok, "b_hat": b, "box_reports": [r.as_dict() for r in reps],
                "radius_report": rad.as_dict()}
    if suite == "bounds":
        lo, sup, hi = bounds.steiner_bounds()
        pt = bounds.solve_bound_curve(1e-6)
        ok_st = lo == 0.25 and abs(sup - 0.283) <= 1e-3 and abs(hi - math.sqrt(1 / 8)) <= 1e-10
        theta_ratio = pt.theta0 / math.sqrt(24 * pt.alpha)
        ok_d = abs(pt.D - 10) <= 0.1
        ok_t = abs(theta_ratio - 1) <= 0.01
        return {"suite": suite, "ok": ok_st and ok_d and ok_t,
                "steiner": {"lower": lo, "sup": sup, "upper": hi, "ok": ok_st},
                "bound_curve": {"alpha": pt.alpha, "L": pt.L, "D": pt.D, "theta0": pt.theta0,
                                "theta_ratio": theta_ratio, "D_ok": ok_d, "theta_ok": ok_t}}
    if suite == "transit":
        from .transit import transit_suite
        res = transit_suite(params, lam=args.lam, h=args.h, n_reps=args.trials or 20)
        ok = (res["sandwich_stated_ok"] and res["audit"]["mismatches"] == 0 and res["intensity"]["pass"]
              and res["access_size"]["pass"] and res["cost_model"]["pass"])
        return {"suite": suite, "ok": ok, **res}
    raise UsageError(f"unknown suite {suite}")


def cmd_verify(args) -> int:
    params = model_params(args)
    suites = SUITES if args.suite == "all" else (args.suite,)
    results = {s: run_verify_suite(s, params, args) for s in suites}
    ok = all(r["ok"] for r in results.values())
    rec = {"ok": ok, "params": {"gamma": str(params.gamma), "H_min": params.finest_level,
                                "seed": params.master_seed}, "suites": results}
    text = dumps(rec)
    write_atomic(out_dir(args) / f"verify_{args.suite}.json", text)
    for s, r in results.items():
        sys.stdout.write(f"{s}: {'PASS' if r['ok'] else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_transit(args) -> int:
    from dataclasses import asdict
    from .geometry import length_in_window, to_svg
    from .stats import Replicate, WindowSpec
    from .transit import audit_summary, cost_model, transit_experiment
    params = model_params(args)
    R = Replicate(args.lam, args.rep, params, WindowSpec(1.5, 2.0), tag=11)
    ex = transit_experiment(R, args.h, max_pairs=args.pairs, seed=args.rep)
    out = out_dir(args)
    header = ["x1", "y1", "x2", "y2", "sep_inf", "well_separated", "passes_both", "match",
              "direct_states", "local_states", "n_access_1", "n_access_2"]
    rows = [[*a.z1, *a.z2, a.sep_inf, a.well_separated(args.h), a.passes_both, a.match, a.direct_states,
             a.local_states, *a.n_access] for a in ex["audits"]]
    write_atomic(out / "transit_audit.csv", rows_to_csv(header, rows))
    p_h = length_in_window(R.E(args.h), R.measure_window) / R.measure_window.area
    cm = cost_model(args.M, args.c1, args.c2, p1=max(args.h * p_h, 1e-12), K_search=args.K)
    rep = {"cost_model": asdict(cm), "audit": audit_summary(ex["audits"], args.h), "sandwich": ex["sandwich"],
           "node_count_in_window": ex["node_count_in_window"], "window_area": ex["window_area"],
           "params": {"lambda": args.lam, "h": args.h, "rep": args.rep, "seed": params.master_seed}}
    text = dumps(rep)
    write_atomic(out / "transit.json", text)
    net = R.network().continuum_segments()
    write_atomic(out / "transit.svg", to_svg(net, ex["nodes"].positions()))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_alt(args) -> int:
    from .alt_models import (LineNetwork, build_dynamic_gabriel, line_uniqueness_probe, min_time_route_gabriel,
                             sample_line_process)
    from .geometry import Window, to_svg
    win = Window.square(args.half)
    rng = np.random.default_rng(args.seed)
    out = out_dir(args)
    if args.model == "lines":
        lines = sample_line_process(win, args.rate, args.gamma, args.vmin, args.vmax, args.seed)
        net = LineNetwork(lines, win)
        probe = line_uniqueness_probe(net, args.queries, args.seed)
        segs = np.array([[*net.points[a], *net.points[b]] for a in range(len(net.adj))
                         for b, _, _ in net.adj[a] if a < b]).reshape(-1, 4)
        rec = {"model": "lines", "n_lines": len(lines), "n_vertices": len(net.points), "probe": probe}
    else:
        g = build_dynamic_gabriel(args.rate, args.gamma_g, win, args.seed)
        ties = 0
        times = []
        for _ in range(args.queries):
            z = rng.uniform(-args.half, args.half, (2, 2))
            r = min_time_route_gabriel(z[0], z[1], g)
            ties += not r.unique
            times.append(r.time)
        segs = g.segments()
        rec = {"model": "gabriel", "n_points": g.n, "n_edges": len(g.edges), "queries": args.queries,
               "ties": ties, "mean_time": float(np.mean(times)) if times else None}
    rec["params"] = {k: getattr(args, k) for k in ("seed", "half", "rate", "gamma", "gamma_g", "vmin", "vmax", "queries")}
    write_atomic(out / f"alt_{args.model}.csv", rows_to_csv(["x1", "y1", "x2", "y2"], segs.tolist()))
    write_atomic(out / f"alt_{args.model}.svg", to_svg(segs))
    text = dumps(rec)
    write_atomic(out / f"alt_{args.model}.json", text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"route": cmd_route, "stats": cmd_stats, "verify": cmd_verify, "transit": cmd_transit, "alt": cmd_alt}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if args.workers < 1:
        sys.stderr.write("error: --workers must be positive\n")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ResourceLimitError as exc:
        sys.stderr.write(f"resource limit: {exc}\n")
        return EXIT_RESOURCE
    except (UsageError, ParameterError, PreconditionError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
