"""Hill index of field-based supercritical masses per t, next to the atomic ground truth.

    python scripts/tail_study.py --points 128 --replicas 1000 --threads 8
"""

import argparse
import json

from chaoscope.fields import GridSpec
from chaoscope.kernels import make_kernel
from chaoscope.parallel import default_threads
from chaoscope.stats import supercritical_tail_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=3.0)
    ap.add_argument("--points", type=int, default=64)
    ap.add_argument("--length", type=float, default=1.0)
    ap.add_argument("--t", type=float, nargs="+", default=[2.0, 4.0, 6.0])
    ap.add_argument("--replicas", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    d = 2
    rep = supercritical_tail_study(make_kernel("ball", d), GridSpec(d, args.points, args.length),
                                   args.gamma, args.t, args.replicas, args.seed,
                                   threads=args.threads or default_threads())
    print(json.dumps(rep, indent=1, default=float))


if __name__ == "__main__":
    main()
