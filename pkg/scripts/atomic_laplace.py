"""Laplace functional and fractional moments of the atomic measure versus closed forms.

    python scripts/atomic_laplace.py --gamma 3 --zmin 1e-4 1e-3 1e-2
"""

import argparse

import numpy as np

from chaoscope import atomic
from chaoscope.stats import EnsembleSummary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--gamma", type=float, default=3.0)
    ap.add_argument("--zmin", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    ap.add_argument("--replicas", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    d, gamma = args.d, args.gamma
    alpha = atomic.alpha_of(d, gamma)
    nu = atomic.LebesgueIntensity(np.zeros(d), np.ones(d))
    lap = atomic.laplace_closed_form(nu, lambda x: np.ones(len(x)), gamma)
    q = alpha / 2
    mom = atomic.fractional_moment_closed_form(1.0, q, gamma, d)
    print(f"alpha={alpha:.4f} beta={atomic.beta_constant(d, gamma):.6f}")
    print(f"{'z_min':>8} {'comp':>5} {'E e^-M':>9} {'se':>8} {'closed':>9} {'bias':>8} "
          f"{'E M^q':>8} {'se':>7} {'closed':>8}")
    for z in args.zmin:
        for comp in (False, True):
            m = atomic.sample_total_masses(1.0, d, gamma, z, args.replicas, args.seed, comp)
            a, b = EnsembleSummary.from_values(np.exp(-m)), EnsembleSummary.from_values(m ** q)
            bias = atomic.truncation_bias_bound(1.0, alpha, z, 1.0, comp)
            print(f"{z:8.0e} {str(comp):>5} {a.mean:9.5f} {a.se:8.5f} {lap:9.5f} {bias:8.1e} "
                  f"{b.mean:8.4f} {b.se:7.4f} {mom:8.4f}")


if __name__ == "__main__":
    main()
