"""Empirical-Bernstein coverage on Bernoulli samples, exact enumeration.

Prints the probability that the true mean falls outside the empirical
interval against the nominal failure bound.
"""

import argparse

from concentra.verify import bernoulli_spec, eb_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--q", type=float, nargs="+", default=[0.05, 0.1, 0.3, 0.5])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 16, 32, 48])
    ap.add_argument("--t", type=float, nargs="+", default=[1.0, 2.0, 4.0, 6.0, 8.0])
    a = ap.parse_args()

    print("q      n    t     miss_prob    bound      slack")
    for q in a.q:
        for n in a.n:
            ts = [t for t in a.t if t < n / 4]
            if not ts:
                continue
            for r in eb_experiment(bernoulli_spec(q, n, ts)).rows:
                if r.experiment == "eb.one":
                    print(f"{q:4.2f}  {n:3d}  {r.t:4.1f}  {r.probability:10.4e}  {r.bound:9.4e}  {r.slack:8.4f}")


if __name__ == "__main__":
    main()
