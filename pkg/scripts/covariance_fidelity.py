"""Empirical covariance of X*_t on a 1-D torus against quadrature.

    python scripts/covariance_fidelity.py --replicas 2000 --t 2
"""

import argparse

import numpy as np

from chaoscope.fields import (GridSpec, LayerCache, lattice_amplitude, lattice_covariance,
                              sample_martingale_path)
from chaoscope.kernels import make_kernel
from chaoscope.spectral import spectrum_Kt
from chaoscope.stats import martingale_covariance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--length", type=float, default=64.0)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--replicas", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    k = make_kernel("ball", 1)
    g = GridSpec(1, args.points, args.length)
    lags = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0])
    idx = np.rint(lags / g.spacing).astype(int)
    exact = lattice_covariance(g, lattice_amplitude(g, spectrum_Kt(k, args.t)))
    cache = LayerCache(k, g)
    est = np.empty((args.replicas, lags.size))
    for r in range(args.replicas):
        v = sample_martingale_path(k, g, [args.t], args.seed, (3, r), cache)[0].values
        est[r] = [np.mean(v * np.roll(v, -i)) for i in idx]
    mean, se = est.mean(0), est.std(0, ddof=1) / np.sqrt(args.replicas)
    print(f"{'lag':>6} {'quadrature':>11} {'lattice':>11} {'empirical':>11} {'z':>6}")
    for h, i, m, s in zip(lags, idx, mean, se):
        q = args.t if h == 0 else martingale_covariance(k, h, args.t)
        print(f"{h:6.2f} {q:11.6f} {exact[i]:11.6f} {m:11.6f} {(m - q) / s:6.2f}")


if __name__ == "__main__":
    main()
