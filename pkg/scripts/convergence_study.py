"""Refine a continuous source and watch the triples and joint laws settle."""

import argparse
import sys

import numpy as np

from leftcurtain.limits import convergence_probe
from leftcurtain.measures import discretize, uniform_quantile


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--source", type=float, nargs=2, default=[0.0, 2.0], help="uniform source interval")
    p.add_argument("--target", type=float, nargs=2, default=[-1.0, 3.0], help="uniform target interval")
    p.add_argument("--target-bins", type=int, default=50)
    p.add_argument("--ns", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--grid", type=int, default=19)
    p.add_argument("--csv", help="write the per-grid-point table here")
    a = p.parse_args(argv)

    nu = discretize(uniform_quantile(*a.target), a.target_bins)
    grid = np.arange(1, a.grid + 1) / (a.grid + 1)
    rep = convergence_probe(uniform_quantile(*a.source), nu, a.ns, grid)
    print(rep.dumps())
    if a.csv:
        with open(a.csv, "w") as fh:
            fh.write(rep.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
