"""Compare deviation radii: variance-based, Massart, VC-type and empirical Bernstein."""

import argparse
import math

import numpy as np

from concentra import bounds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t", type=float, default=3.0)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--d", type=int, default=3)
    a = ap.parse_args()

    print("EV         bernstein   cor2       massart    cor2/massart")
    for ev in np.logspace(-3, 2, 11):
        v, c, m = (f(ev, a.b, a.t) for f in (bounds.variance_radius, bounds.cor2_radius, bounds.massart_radius))
        print(f"{ev:9.3e}  {v:9.4e}  {c:9.4e}  {m:9.4e}  {c / m:.4f}")

    print(f"\nVC class d={a.d}, t={a.t}")
    print("n        vc_optimistic  eb(var_sum=1/2)")
    for n in (32, 128, 512, 2048, 8192):
        if a.t < n / 4 and a.t >= math.log(2):
            print(f"{n:6d}   {bounds.vc_optimistic_radius(a.d, n, a.t):11.4e}    "
                  f"{bounds.eb_radius(0.5, n, a.t):11.4e}")


if __name__ == "__main__":
    main()
