"""Scaling collapses and identity checks of the statistics suite.

Writes the per-replicate rows and the aggregated checks as JSON.
"""
import argparse
import json
import time
from pathlib import Path

from sirsn.cli import clean
from sirsn.dyadic import ModelParams
from sirsn.stats import SuiteConfig, aggregate_suite, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=40)
    ap.add_argument("--hmin", type=int, default=-4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/stats_suite.json")
    a = ap.parse_args()
    params = ModelParams(finest_level=a.hmin, master_seed=a.seed)
    cfg = SuiteConfig(n_reps=a.reps, workers=a.workers)
    t0 = time.time()
    rows = run_suite(params, cfg)
    agg = aggregate_suite(rows, params, cfg)
    agg["runtime_s"] = time.time() - t0
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(clean(agg), indent=2, sort_keys=True))
    print(json.dumps(clean(agg["checks"]), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
