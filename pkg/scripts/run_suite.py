#!/usr/bin/env python3
"""Run the acceptance battery and print one line per criterion."""

from __future__ import annotations

import argparse
import sys

from haarbridge.suite import SuiteConfig, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--scale", type=float, default=1.0, help="replica multiplier")
    ap.add_argument("--only", type=int, nargs="+", default=())
    ap.add_argument("--out", default="suite-output")
    args = ap.parse_args()
    cfg = SuiteConfig(args.seed, args.threads, args.scale, tuple(args.only))
    outcomes = run_suite(cfg, args.out, stream=None)
    for o in outcomes:
        print(f"{o.line()}  ({o.seconds:.1f} s)")
    return 0 if all(o.passed for o in outcomes) else 2


if __name__ == "__main__":
    sys.exit(main())
