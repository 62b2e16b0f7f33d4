"""delta_1 against U[0,2]: model price, exercise threshold, hedge and the BHZ value.

Writes the threshold profile A(u) next to its closed form (1 + u - u^2)/4.
"""

import argparse
import csv
import sys

from leftcurtain import american_put as ap
from leftcurtain.curtain import build_left_curtain
from leftcurtain.instances import trivial_uniform


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=2000, help="bins used to discretise U[0,2]")
    p.add_argument("--k1", type=float, default=1.25)
    p.add_argument("--k2", type=float, default=1.0)
    p.add_argument("--profile", help="CSV path for the A(u) profile")
    a = p.parse_args(argv)

    mu, nu = trivial_uniform(a.n)
    t = build_left_curtain(mu, nu)
    k = ap.PutPair(a.k1, a.k2)
    rep = ap.price(t, mu, nu, k)
    th = ap.find_ustar(t, k)
    print(f"model price   {rep.primal:.6f}")
    print(f"u*            {th.u_star:.6f} ({th.tag})")
    if th.tag == "root":
        h = ap.build_hedge(t, k, th)
        print(f"hedge         theta={h.theta:.6f}  strikes=({h.strike_low:.6f}, {h.strike_high:.6f})  cost={h.cost:.6f}")
    print(f"cheapest dual {rep.dual:.6f}")
    print(f"BHZ value     {rep.bhz:.6f}")
    if a.profile:
        with open(a.profile, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["u", "A", "closed_form"])
            for u, v in ap.threshold_profile(t, k):
                wr.writerow([f"{u:.17g}", f"{v:.17g}", f"{(1 + u - u * u) / 4:.17g}"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
