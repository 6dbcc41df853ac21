"""Sweep random cube events and report the tightest Prop-1 slack per alpha.

usage: python3 scripts/prop1_sweep.py [--n 8] [--events 50] [--seed 0]
"""

import argparse

import numpy as np

from concentra.cube import CubeEvent, all_bitstrings, convex_distances_all, prop1_verify


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--events", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    rng = np.random.default_rng(a.seed)
    cube = all_bitstrings(a.n)
    alphas = (0.25, 0.5, 1.0, 2.0, 4.0)
    worst = {al: (np.inf, None) for al in alphas}
    for _ in range(a.events):
        size = int(rng.integers(1, 2**a.n))
        A = CubeEvent(cube[np.sort(rng.choice(2**a.n, size, replace=False))])
        fc2 = convex_distances_all(A)
        for al in alphas:
            rep = prop1_verify(A, al, np.linspace(0, 10, 41), fc2=fc2)
            for r in rep.rows:
                if r["slack"] < worst[al][0]:
                    worst[al] = (r["slack"], (size / 2**a.n, r["t"], r["lhs"], r["rhs"]))
    print("alpha  worst_slack   P(A)     t      P(fc2>=t)  bound")
    for al, (s, (pa, t, p, b)) in worst.items():
        print(f"{al:5.2f}  {s:10.4e}  {pa:6.4f}  {t:5.2f}  {p:9.4e}  {b:9.4e}")


if __name__ == "__main__":
    main()
