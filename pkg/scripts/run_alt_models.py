"""Diagnostics of the line-process and dynamic Gabriel routers."""
import argparse
import time

import numpy as np

from sirsn.alt_models import (LineNetwork, build_dynamic_gabriel, gabriel_scale_check, line_uniqueness_probe,
                              sample_line_process)
from sirsn.geometry import Window


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--half", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    win = Window.square(a.half)
    for g in (2.5, 3.0, 4.0):
        net = LineNetwork(sample_line_process(win, 1.0, g, 1.0, 10.0, a.seed), win)
        print(f"lines gamma={g}: vertices={len(net.points)}", line_uniqueness_probe(net, 50, a.seed))
    t0 = time.time()
    g = build_dynamic_gabriel(100.0, 0.0, win, a.seed)
    print(f"gabriel: {g.n} points, {len(g.edges)} edges, built in {time.time() - t0:.1f}s")
    chk = gabriel_scale_check(4.0, 2.0, a.half, 10, a.seed)
    print("scale check (edges per point, sqrt(lam) * mean edge length):",
          {k: np.round(v["mean"], 4).tolist() for k, v in chk.items()})


if __name__ == "__main__":
    main()
