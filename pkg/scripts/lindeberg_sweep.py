#!/usr/bin/env python3
"""KS distance between Bernoulli and Gaussian bilinear forms across selector levels."""

from __future__ import annotations

import argparse

from haarbridge.montecarlo import lindeberg_compare


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ensemble", default="unitary")
    ap.add_argument("--n", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--levels", type=float, nargs="+", default=[0.05, 0.2, 0.5])
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    print("level," + ",".join(f"KS n={n}" for n in args.n))
    for lv in args.levels:
        res = lindeberg_compare(tuple(args.n), args.replicas, args.ensemble, lv, lv, args.seed)
        ks = [r["estimate"] for r in res.rows if r["quantity"] == "KS(A,B) statistic"]
        print(f"{lv}," + ",".join(f"{x:.4f}" for x in ks))


if __name__ == "__main__":
    main()
