#!/usr/bin/env python3
"""Exact sup distance between the flat-moduli calZ(s, t) law and its limit.

With flat moduli, calZ(s, t) = A B / n where A and B are independent centred
Binomial(n, s) and Binomial(n, t) counts.  The law is a finite lattice, so the
Kolmogorov distance to the product-normal limit is computed exactly and set
against the KS critical value for a given replica count.
"""

from __future__ import annotations

import argparse
import math

import numpy as np
from scipy import stats

from haarbridge.limits import marginal_limit_cdf


def lattice_distance(n: int, s: float, t: float) -> float:
    ka, kb = np.arange(n + 1), np.arange(n + 1)
    pa, pb = stats.binom.pmf(ka, n, s), stats.binom.pmf(kb, n, t)
    vals = np.outer(ka - n * s, kb - n * t).ravel() / n / math.sqrt(s * (1 - s) * t * (1 - t))
    probs = np.outer(pa, pb).ravel()
    keep = probs > 1e-300
    vals, probs = vals[keep], probs[keep]
    order = np.argsort(vals, kind="stable")
    vals, probs = vals[order], probs[order]
    uniq, start = np.unique(vals, return_index=True)
    cdf = np.cumsum(probs)[np.r_[start[1:] - 1, len(vals) - 1]]
    before = np.r_[0.0, cdf[:-1]]
    lim = marginal_limit_cdf(uniq, 0.0)
    return float(max(np.abs(cdf - lim).max(), np.abs(before - lim).max()))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--replicas", type=int, default=5000)
    ap.add_argument("--alpha", type=float, default=1e-3)
    ap.add_argument("--points", type=float, nargs="+", default=[0.5, 0.4975, 0.49, 0.45])
    args = ap.parse_args()
    crit = stats.kstwobign.isf(args.alpha) / math.sqrt(args.replicas)
    print(f"KS critical distance at alpha={args.alpha}, M={args.replicas}: {crit:.4f}")
    for p in args.points:
        print(f"s = t = {p}: exact sup distance {lattice_distance(args.n, p, p):.4f}")


if __name__ == "__main__":
    main()
