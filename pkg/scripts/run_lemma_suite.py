"""Exact lemma suite, box exclusion, radius corollary and empirical constants."""
import argparse
import json
import time

from sirsn.checks import extract_b, extract_constants, lemma_suite, radius_suite
from sirsn.cli import clean
from sirsn.dyadic import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=1000)
    ap.add_argument("--box-trials", type=int, default=10_000)
    ap.add_argument("--hmin", type=int, default=-4)
    a = ap.parse_args()
    t0 = time.time()
    lem = lemma_suite(ModelParams(finest_level=a.hmin), n_pairs=a.pairs)
    print("lemmas", {k: v["failures"] for k, v in lem.items() if isinstance(v, dict)},
          f"tied pairs {lem['tied_pairs']}", f"{time.time() - t0:.0f}s")
    b, reps = extract_b(a.box_trials)
    rad = radius_suite(b, a.box_trials)
    print(f"b_hat={b}", [(r.constants["b"], r.failures) for r in reps], "radius failures", rad.failures)
    print(json.dumps(clean(extract_constants(1000).constants), indent=2))


if __name__ == "__main__":
    main()
