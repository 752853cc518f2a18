"""Admissible constant and decomposition residuals for the ball kernels.

    python scripts/decomposition_scan.py --dims 1 2 3 --out results/decomp.csv
"""

import argparse
import csv

from chaoscope import spectral
from chaoscope.kernels import make_kernel, make_mollifier


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    scan = spectral.frequency_scan()
    rows = []
    for d in args.dims:
        k, m = make_kernel("ball", d), make_mollifier("standard", d)
        cert = spectral.find_admissible_a(k, m, scan)
        for t in cert.t_grid:
            rows.append([d, cert.a_const, t, cert.identity_residual[t], cert.min_KZ_per_t[t],
                         cert.sup_KZ_per_t[t]])
        print(f"d={d}: a={cert.a_const:g} min K_W={cert.min_KW:.2e} "
              f"max residual={max(cert.identity_residual.values()):.2e}")
    header = ["d", "a", "t", "identity_residual", "min_KZ", "sup_KZ"]
    for r in rows:
        print("  " + "  ".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in r))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


if __name__ == "__main__":
    main()
