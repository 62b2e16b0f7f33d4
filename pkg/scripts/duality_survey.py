"""Primal against dual over random instances, split by exercise archetype.

For each instance and strike pair the two-put search, the constructive
hedge (root archetype) and the full convex-psi LP are compared with the
model price.
"""

import argparse
import sys
from collections import defaultdict

import numpy as np

from leftcurtain import american_put as ap
from leftcurtain.curtain import build_left_curtain
from leftcurtain.instances import random_pairs


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--strikes", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)

    rng = np.random.default_rng(a.seed)
    stats = defaultdict(lambda: {"count": 0, "max_gap": 0.0, "max_lp_gap": 0.0, "min_gap": np.inf})
    for mu, nu in random_pairs(a.instances, seed=a.seed):
        t = build_left_curtain(mu, nu)
        for _ in range(a.strikes):
            k1 = rng.uniform(mu.x[0], nu.x[-1] + .25)
            k = ap.PutPair(k1, k1 - rng.uniform(.05, max(.1, k1 - nu.x[0] + .25)))
            rep = ap.price(t, mu, nu, k)
            lp = ap.dual_lp(mu, nu, k)
            s = stats[rep.archetype]
            s["count"] += 1
            s["max_gap"] = max(s["max_gap"], rep.gap)
            s["min_gap"] = min(s["min_gap"], rep.gap)
            s["max_lp_gap"] = max(s["max_lp_gap"], abs(lp - rep.primal))
    print(f"{'archetype':<16}{'count':>6}{'min gap':>12}{'max gap':>12}{'|LP-primal|':>14}")
    for tag, s in sorted(stats.items()):
        print(f"{tag:<16}{s['count']:>6}{s['min_gap']:>12.2e}{s['max_gap']:>12.2e}{s['max_lp_gap']:>14.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
