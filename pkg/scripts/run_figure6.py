"""Search for the smallest h at which the funnel configuration verifies, for several gamma."""
import argparse
from fractions import Fraction

from sirsn.checks import search_figure6


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gammas", default="3/4,2/3,5/8")
    ap.add_argument("--hmax", type=int, default=8)
    a = ap.parse_args()
    for g in a.gammas.split(","):
        h, reports = search_figure6(Fraction(g), range(2, a.hmax + 1))
        last = reports[-1]
        detail = last.get("details", {}) if isinstance(last, dict) else {}
        print(f"gamma={g}: smallest verified h={h}  eta={detail.get('eta')}  "
              f"avoiding excess={detail.get('avoiding_excess')}")


if __name__ == "__main__":
    main()
