"""Median share of mass in the 10 heaviest cells of the supercritical measure, per t.

    python scripts/atomicity_trend.py --points 512 --replicas 100 --threads 4
"""

import argparse

import numpy as np

from chaoscope import gmc
from chaoscope.fields import GridSpec, LayerCache, sample_martingale_path
from chaoscope.kernels import make_kernel
from chaoscope.parallel import default_threads, map_replicas


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=3.0)
    ap.add_argument("--points", type=int, default=256)
    ap.add_argument("--t", type=float, nargs="+", default=[2.0, 4.0, 6.0, 8.0])
    ap.add_argument("--replicas", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    d = 2
    k = make_kernel("ball", d)
    g = GridSpec(d, args.points, 1.0)
    cache = LayerCache(k, g)
    lo = 0.0
    for t in args.t:
        cache(lo, t)
        lo = t

    def one(r):
        out = []
        for f in sample_martingale_path(k, g, args.t, args.seed, (11, r), cache):
            t = f.meta["t"]
            mu = gmc.chaos_measure(f, args.gamma, variance=t, norm_mode="t",
                                   log_norm=gmc.log_supercritical_norm(d, args.gamma, "t", t))
            out.append(gmc.top_cells_fraction(mu, 10))
        return out

    frac = np.array(map_replicas(one, args.replicas, args.threads or default_threads()))
    for t, col in zip(args.t, frac.T):
        q25, q50, q75 = np.quantile(col, [0.25, 0.5, 0.75])
        print(f"t={t:4g}  median {q50:.4g}  IQR [{q25:.3g}, {q75:.3g}]")


if __name__ == "__main__":
    main()
