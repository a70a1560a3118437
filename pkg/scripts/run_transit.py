"""Transit-node suite and the out-of-sample audit along a lambda ladder."""
import argparse
import json
from pathlib import Path

from sirsn.cli import clean
from sirsn.dyadic import ModelParams
from sirsn.transit import out_of_sample_ladder, transit_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--h", type=float, default=0.25)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--ladder", default="0.25,1,4")
    ap.add_argument("--hmin", type=int, default=-4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/transit.json")
    a = ap.parse_args()
    params = ModelParams(finest_level=a.hmin, master_seed=a.seed)
    res = transit_suite(params, lam=a.lam, h=a.h, n_reps=a.reps)
    lams = [float(x) for x in a.ladder.split(",")]
    res["out_of_sample"] = out_of_sample_ladder(params, lams, a.h, n_reps=3, n_pairs=5)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(clean(res), indent=2, sort_keys=True))
    print(json.dumps(clean(res), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
