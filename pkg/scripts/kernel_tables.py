#!/usr/bin/env python3
"""Write the limit covariance kernels and the finite-n calZ kernels on a grid as CSV."""

from __future__ import annotations

import argparse
from pathlib import Path

from haarbridge.ensembles import EnsembleKind
from haarbridge.limits import CovKernel2D, KernelKind, z_moment_constant
from haarbridge.processes import GridSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="0.1,0.3,0.5,0.7,0.9")
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--out", default="kernels")
    args = ap.parse_args()
    grid = GridSpec.parse(args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind in KernelKind:
        CovKernel2D(kind).to_csv(grid, out / f"{kind.value}.csv")
    for ens in EnsembleKind:
        k = float(z_moment_constant(args.n, ens))
        CovKernel2D(KernelKind.TIED_DOWN_BRIDGE, k).to_csv(grid, out / f"calZ-{ens.value}-n{args.n}.csv")
    print(f"wrote {len(KernelKind) + len(EnsembleKind)} tables to {out}/")


if __name__ == "__main__":
    main()
