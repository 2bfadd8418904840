"""Command-line front end.

    haarbridge sample --ensemble dft --n 4 --out f4.csv --format csv
    haarbridge verify-moments --ensemble unitary --n 8 --replicas 1000000 --seed 7
    haarbridge suite --seed 7 --threads 8 --out results/

Exit codes: 0 when every check passes, 2 on a statistical failure (a JSON
failure report goes to stderr), 1 on a usage or I/O error.  The default seed
comes from ``HAARBRIDGE_SEED`` when set.  ``--config FILE`` reads a JSON
object whose keys override the matching flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from . import suite as suite_mod
from .ensembles import EnsembleKind, RngStream, sample_matrix
from .moments import UnsupportedEnsemble, moment_table
from .processes import GridSpec, fmt

EXIT_OK, EXIT_USAGE, EXIT_STAT = 0, 1, 2
SEED_ENV = "HAARBRIDGE_SEED"

VERB_DEFAULTS = {
    "sample": {"replicas": 1, "n": [4]},
    "verify-moments": {"replicas": 100_000, "n": [8]},
    "covariance": {"replicas": 20_000, "n": [32]},
    "marginal": {"replicas": 5000, "n": [200]},
    "lindeberg": {"replicas": 5000, "n": [16, 64, 256]},
    "decompose-check": {"replicas": 100, "n": [8, 32, 128]},
    "spacings": {"replicas": 2000, "n": [100, 1000, 10_000]},
    "suite": {"replicas": None, "n": None},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 7
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--ensemble", default="unitary", help="unitary | orthogonal | dft | permutation")
    shared.add_argument("--n", type=int, nargs="+", help="matrix order(s)")
    shared.add_argument("--replicas", type=int, help="Monte Carlo replicas M")
    shared.add_argument("--seed", type=int, help=f"64-bit seed (default ${SEED_ENV} or 7)")
    shared.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    shared.add_argument("--grid", help='grid points, "0,0.5,1" or "s-list;t-list"')
    shared.add_argument("--out", help="output file (directory for suite); stdout when omitted")
    shared.add_argument("--format", choices=("csv", "json"), help="default: from the --out suffix, else json")
    shared.add_argument("--config", help="JSON file whose keys override the flags")

    p = _Parser(prog="haarbridge", description="Monte Carlo checks for random truncations of Haar matrices.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("sample", parents=[shared], help="write sampled matrices (complex entries as re, im)")
    sub.add_parser("verify-moments", parents=[shared], help="exact entry moments against Monte Carlo")
    cov = sub.add_parser("covariance", parents=[shared], help="covariance of calZ or calT against the kernels")
    cov.add_argument("--process", choices=("calZ", "calT"), default="calZ")
    marg = sub.add_parser("marginal", parents=[shared], help="KS test of a one-point marginal")
    marg.add_argument("--process", choices=("calZ", "calT"), default="calZ")
    marg.add_argument("--s", type=float, default=0.5)
    marg.add_argument("--t", type=float, default=0.5)
    lin = sub.add_parser("lindeberg", parents=[shared], help="Bernoulli versus Gaussian bilinear forms")
    lin.add_argument("--s", type=float, default=0.05)
    lin.add_argument("--t", type=float, default=0.05)
    sub.add_parser("decompose-check", parents=[shared], help="exact decomposition and boundary invariants")
    sub.add_parser("spacings", parents=[shared], help="window counts and Dirichlet spacings")
    su = sub.add_parser("suite", parents=[shared], help="run the acceptance battery")
    su.add_argument("--scale", type=float, default=1.0, help="replica multiplier (below 1 for smoke runs)")
    su.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    return p


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest) or dest in ("verb", "config"):
                raise UsageError(f"unknown config key {key!r}")
            if dest == "n" and isinstance(value, int):
                value = [value]
            setattr(args, dest, value)
    if args.format is None:
        args.format = "csv" if args.out and str(args.out).lower().endswith(".csv") else "json"
    defaults = VERB_DEFAULTS[args.verb]
    if args.n is None:
        args.n = defaults["n"]
    if args.replicas is None:
        args.replicas = defaults["replicas"]
    if args.seed is None:
        args.seed = _default_seed()
    if args.n is not None and any(int(n) < 1 for n in args.n):
        raise UsageError(f"--n must be positive, got {args.n}")
    if args.replicas is not None and int(args.replicas) < 1:
        raise UsageError(f"--replicas must be >= 1, got {args.replicas}")
    if int(args.threads) < 1:
        raise UsageError(f"--threads must be >= 1, got {args.threads}")
    if not 0 <= int(args.seed) < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    try:
        args.ensemble = EnsembleKind.parse(args.ensemble)
        args.grid = GridSpec.parse(args.grid) if args.grid else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return args


def _provenance(args) -> dict:
    """Everything that determines the output; ``threads`` is left out on purpose."""
    skip = {"threads", "out", "config", "format"}
    doc = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, EnsembleKind):
            v = v.value
        elif isinstance(v, GridSpec):
            v = {"s_points": list(v.s_points), "t_points": list(v.t_points)}
        doc[k] = v
    return doc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_results(args, results: list[mc.ExperimentResult], extra: dict | None = None) -> int:
    prov = _provenance(args)
    if args.format == "json":
        doc = {"config": prov, "passed": all(r.passed for r in results), "experiments": [r.to_dict() for r in results]}
        if extra:
            doc.update(extra)
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        buf = io.StringIO()
        buf.write("# " + json.dumps(prov, sort_keys=True) + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("experiment",) + mc.CSV_COLUMNS)
        for r in results:
            for row in r.rows:
                wr.writerow(
                    [r.name, row["n"]]
                    + [fmt(row[k]) for k in ("s", "t", "s2", "t2", "estimate", "se", "oracle", "zscore")]
                    + [row["quantity"]]
                )
        _emit(buf.getvalue(), args.out)
    failed = [{"experiment": r.name, **c} for r in results for c in r.checks if not c["passed"]]
    if failed:
        sys.stderr.write(json.dumps({"status": "statistical-failure", "failed": failed}, sort_keys=True) + "\n")
        return EXIT_STAT
    return EXIT_OK


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------


def cmd_sample(args) -> int:
    n = args.n[0]
    stream = RngStream(int(args.seed), n, (0x5A,))
    mats = np.asarray(sample_matrix(args.ensemble, n, stream, args.replicas), dtype=complex)
    prov = _provenance(args)
    if args.format == "json":
        doc = {"config": prov, "matrices": [{"re": m.real.tolist(), "im": m.imag.tolist()} for m in mats]}
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
        return EXIT_OK
    buf = io.StringIO()
    buf.write("# " + json.dumps(prov, sort_keys=True) + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(("replica", "i", "j", "re", "im"))
    for k, m in enumerate(mats):
        for i in range(n):
            for j in range(n):
                wr.writerow((k, i + 1, j + 1, fmt(m[i, j].real), fmt(m[i, j].imag)))
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_verify_moments(args) -> int:
    if not args.ensemble.is_haar:
        raise UsageError(f"verify-moments needs a Haar ensemble, got {args.ensemble.value}")
    results, tables = [], {}
    for n in args.n:
        results.append(mc.moment_experiment(args.ensemble, n, args.replicas, args.seed, args.threads))
        tables[str(n)] = [r.as_dict() for r in moment_table(args.ensemble, n)]
    return _emit_results(args, results, {"exact": tables})


def _grid_pairs(grid: GridSpec):
    pts = [(s, t) for s in grid.s_points for t in grid.t_points]
    return [(p, q) for i, p in enumerate(pts) for q in pts[i:]]


def cmd_covariance(args) -> int:
    pairs = _grid_pairs(args.grid) if args.grid else mc.STANDARD_PAIRS
    cfg = mc.ExperimentConfig(args.ensemble, args.n, args.replicas, args.grid or GridSpec.default(), args.seed, args.threads)
    fn = mc.estimate_z_covariance if args.process == "calZ" else mc.estimate_calT_covariance
    return _emit_results(args, [fn(cfg, pairs)])


def cmd_marginal(args) -> int:
    try:
        fn = mc.marginal_ks if args.process == "calZ" else mc.calT_marginal_ks
        results = [fn(n, args.replicas, args.ensemble, args.s, args.t, args.seed, args.threads)[-1] for n in args.n]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return _emit_results(args, results)


def cmd_lindeberg(args) -> int:
    try:
        r = mc.lindeberg_compare(tuple(args.n), args.replicas, args.ensemble, args.s, args.t, args.seed, args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return _emit_results(args, [r])


def cmd_decompose(args) -> int:
    return _emit_results(args, [mc.anova_check(args.ensemble, tuple(args.n), args.replicas, args.seed, args.threads, args.grid)])


def cmd_spacings(args) -> int:
    return _emit_results(args, [mc.spacings_diagnostics(tuple(args.n), args.replicas, seed=args.seed, workers=args.threads)])


def cmd_suite(args) -> int:
    if args.scale <= 0:
        raise UsageError("--scale must be positive")
    only = tuple(args.only or ())
    if any(k not in suite_mod.CRITERIA for k in only):
        raise UsageError(f"--only takes criterion numbers 1..{len(suite_mod.CRITERIA)}")
    out = Path(args.out or "suite-output")
    cfg = suite_mod.SuiteConfig(seed=int(args.seed), threads=int(args.threads), scale=float(args.scale), only=only)
    outcomes = suite_mod.run_suite(cfg, out, stream=sys.stderr)
    failed = [{"criterion": o.number, "checks": [c["name"] for c in o.result.checks if not c["passed"]]} for o in outcomes if not o.passed]
    if failed:
        sys.stderr.write(json.dumps({"status": "statistical-failure", "failed": failed}, sort_keys=True) + "\n")
        return EXIT_STAT
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "verify-moments": cmd_verify_moments,
    "covariance": cmd_covariance,
    "marginal": cmd_marginal,
    "lindeberg": cmd_lindeberg,
    "decompose-check": cmd_decompose,
    "spacings": cmd_spacings,
    "suite": cmd_suite,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _resolve(parser.parse_args(argv))
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except UnsupportedEnsemble as exc:
        sys.stderr.write(f"haarbridge: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"haarbridge: I/O error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
