"""Reproducible, thread-parallel Monte Carlo experiments.

Replicas are simulated in fixed-size blocks.  Block ``b`` of an experiment
draws from ``RngStream(seed, n, (tag,)).child(b)``, so its random numbers
depend only on the seed, the experiment tag, the order n and the block
index.  Blocks are gathered in index order before any reduction, so every
estimate is bit-identical for any number of worker threads.

Each experiment returns an :class:`ExperimentResult` holding one row per
estimate (``n, s, t, s2, t2, estimate, se, oracle, zscore``) and a list of
named pass/fail checks.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import limits, moments
from .ensembles import (
    EnsembleKind,
    RngStream,
    sample_dirichlet,
    sample_gamma,
    sample_haar_column,
    sample_matrix,
    sample_permutation_indices,
    sample_weights,
)
from .processes import GridSpec, calT_values, calW_values, calZ_values, centered_indicators, fmt

DEFAULT_Z = 4.0
IDENTITY_Z = 5.0
KS_ALPHA = 1e-3
# slack for estimators whose per-replica spread is zero (exact identities)
EXACT_ATOL = 1e-12
KS_TERMS = 100

CSV_COLUMNS = ("n", "s", "t", "s2", "t2", "estimate", "se", "oracle", "zscore", "quantity")

Point = tuple[float, float]
PointPair = tuple[Point, Point]

# Six pairs mixing diagonal, off-diagonal and mismatched-axis cases.
STANDARD_PAIRS: tuple[PointPair, ...] = (
    ((0.5, 0.5), (0.5, 0.5)),
    ((0.3, 0.7), (0.3, 0.7)),
    ((0.3, 0.7), (0.5, 0.5)),
    ((0.1, 0.9), (0.7, 0.3)),
    ((0.2, 0.4), (0.6, 0.8)),
    ((0.5, 0.5), (0.9, 0.1)),
)


# --------------------------------------------------------------------------
# configuration and result types
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    ensemble: EnsembleKind | str = EnsembleKind.HAAR_UNITARY
    n_values: list[int] = field(default_factory=lambda: [32])
    replicas: int = 10_000
    grid: GridSpec = field(default_factory=GridSpec.default)
    seed: int = 7
    workers: int = 1
    output_path: str | None = None
    block_size: int | None = None
    z: float = DEFAULT_Z

    def __post_init__(self):
        self.ensemble = EnsembleKind.parse(self.ensemble)
        if isinstance(self.n_values, int):
            self.n_values = [self.n_values]
        self.n_values = [int(n) for n in self.n_values]
        if not self.n_values:
            raise ValueError("n_values must be non-empty")
        if any(n < 1 for n in self.n_values):
            raise ValueError(f"matrix orders must be positive, got {self.n_values}")
        if int(self.replicas) < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        self.replicas = int(self.replicas)
        if int(self.workers) < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if isinstance(self.grid, str):
            self.grid = GridSpec.parse(self.grid)

    def provenance(self) -> dict:
        """Resolved config without ``workers``, which never changes results."""
        return {
            "ensemble": self.ensemble.value,
            "n_values": list(self.n_values),
            "replicas": self.replicas,
            "grid": {"s_points": list(self.grid.s_points), "t_points": list(self.grid.t_points)},
            "seed": int(self.seed),
            "block_size": self.block_size,
            "z": self.z,
        }


@dataclass(frozen=True)
class EstimateWithCI:
    mean: float
    std_error: float
    replicas: int
    z: float = DEFAULT_Z

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("standard error must be nonnegative")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")

    @classmethod
    def from_samples(cls, x, z: float = DEFAULT_Z) -> EstimateWithCI:
        x = np.asarray(x, dtype=float).ravel()
        m = x.size
        se = float(x.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
        return cls(float(x.mean()), se, m, z)

    @property
    def half_width(self) -> float:
        return self.z * self.std_error

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def zscore(self, target: float) -> float:
        diff = self.mean - float(target)
        if self.std_error > 0:
            return diff / self.std_error
        return 0.0 if abs(diff) <= EXACT_ATOL * max(1.0, abs(target)) else math.copysign(math.inf, diff)

    def agrees(self, target: float, z: float | None = None) -> bool:
        z = self.z if z is None else z
        tol = z * self.std_error + EXACT_ATOL * max(1.0, abs(float(target)))
        return abs(self.mean - float(target)) <= tol


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    sample_size: int

    def passed(self, alpha: float = KS_ALPHA) -> bool:
        return self.p_value > alpha


@dataclass
class ExperimentResult:
    name: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add_row(self, quantity: str, n: int, est: EstimateWithCI | float, oracle=None, points=None):
        (s, t), (s2, t2) = points if points is not None else ((None, None), (None, None))
        if isinstance(est, EstimateWithCI):
            value, se = est.mean, est.std_error
            zs = est.zscore(oracle) if oracle is not None else None
        else:
            value, se, zs = float(est), None, None
        self.rows.append(
            {
                "n": int(n),
                "s": s,
                "t": t,
                "s2": s2,
                "t2": t2,
                "estimate": value,
                "se": se,
                "oracle": None if oracle is None else float(oracle),
                "zscore": zs,
                "quantity": quantity,
            }
        )

    def add_check(self, name: str, passed: bool, **detail) -> bool:
        self.checks.append({"name": name, "passed": bool(passed), **_plain(detail)})
        return bool(passed)

    def extend(self, other: ExperimentResult, prefix: str = "") -> None:
        self.rows.extend(other.rows)
        for c in other.checks:
            self.checks.append({**c, "name": prefix + c["name"]})

    def to_dict(self) -> dict:
        return _plain(
            {
                "name": self.name,
                "passed": self.passed,
                "config": self.config,
                "checks": self.checks,
                "rows": self.rows,
            }
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps({"name": self.name, "config": _plain(self.config)}, sort_keys=True) + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in self.rows:
            wr.writerow(
                [r["n"]]
                + [fmt(r[k]) for k in ("s", "t", "s2", "t2", "estimate", "se", "oracle", "zscore")]
                + [r["quantity"]]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _plain(obj):
    """JSON-ready copy: numpy scalars to Python, enums to values, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, EnsembleKind):
        return obj.value
    if isinstance(obj, GridSpec):
        return {"s_points": list(obj.s_points), "t_points": list(obj.t_points)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


# --------------------------------------------------------------------------
# Kolmogorov-Smirnov
# --------------------------------------------------------------------------


def kolmogorov_sf(x) -> np.ndarray | float:
    """P(K > x) for the Kolmogorov distribution.

    Uses the alternating series ``2 sum (-1)^(k-1) exp(-2 k^2 x^2)`` with 100
    terms for x >= 0.3 and the Jacobi-transformed series below that, where
    the alternating one converges slowly.
    """
    x = np.asarray(x, dtype=float)
    k = np.arange(1, KS_TERMS + 1)
    xs = np.maximum(x, 1e-12)[..., None]
    alt = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * xs**2), axis=-1)
    odd = (2 * k - 1) ** 2
    small = 1.0 - math.sqrt(2 * math.pi) / xs[..., 0] * np.sum(np.exp(-odd * np.pi**2 / (8 * xs**2)), axis=-1)
    out = np.clip(np.where(x < 0.3, small, alt), 0.0, 1.0)
    out = np.where(x <= 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def ks_1samp(sample, cdf: Callable) -> KsResult:
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    d = float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
    return KsResult(d, kolmogorov_sf(math.sqrt(m) * d), m)


def ks_2samp(a, b) -> KsResult:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    both = np.concatenate([a, b])
    fa = np.searchsorted(a, both, side="right") / a.size
    fb = np.searchsorted(b, both, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = a.size * b.size / (a.size + b.size)
    return KsResult(d, kolmogorov_sf(math.sqrt(en) * d), int(a.size + b.size))


# --------------------------------------------------------------------------
# block engine
# --------------------------------------------------------------------------

Kernel = Callable[[np.random.Generator, int], dict]


def default_block_size(n: int) -> int:
    """Replicas per block: about 2M matrix entries, between 1 and 4096."""
    return int(min(4096, max(1, (1 << 21) // max(1, n * n))))


def experiment_stream(seed: int, tag: str, n: int) -> RngStream:
    return RngStream(int(seed), int(n), (zlib.crc32(tag.encode()),))


def run_blocks(
    kernel: Kernel,
    replicas: int,
    stream: RngStream,
    workers: int = 1,
    block_size: int | None = None,
) -> dict[str, np.ndarray]:
    """Evaluate ``kernel(generator, m)`` block by block and concatenate in order.

    The kernel returns a dict of arrays whose leading axis has length m.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    size = int(block_size) if block_size else 1024
    nblocks = -(-replicas // size)

    def job(b: int) -> dict:
        m = min(size, replicas - b * size)
        return kernel(stream.child(b).generator(), m)

    if workers <= 1 or nblocks == 1:
        parts = [job(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as ex:
            parts = list(ex.map(job, range(nblocks)))
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def simulate(kernel: Kernel, tag: str, n: int, replicas: int, seed: int, workers: int = 1, block_size=None):
    bs = block_size or default_block_size(n)
    return run_blocks(kernel, replicas, experiment_stream(seed, tag, n), workers, bs)


def _points_of(pairs: Sequence[PointPair]) -> list[Point]:
    pts: list[Point] = []
    for p, q in pairs:
        for x in (tuple(map(float, p)), tuple(map(float, q))):
            if x not in pts:
                pts.append(x)
    return pts


def _z_at_points(w: np.ndarray, r: np.ndarray, c: np.ndarray, pts: Sequence[Point]) -> np.ndarray:
    """calZ at scattered points, factored as a (w b^T), shape (m, len(pts))."""
    s = np.array([p[0] for p in pts])
    t = np.array([p[1] for p in pts])
    a = centered_indicators(r, s)  # (m, P, n)
    b = centered_indicators(c, t)
    wb = w @ np.swapaxes(b, -1, -2)  # (m, n, P)
    return np.einsum("mpi,mip->mp", a, wb)


def _calT_at_points(w, r, c, pts) -> np.ndarray:
    s = np.array([p[0] for p in pts])
    t = np.array([p[1] for p in pts])
    a = (r[:, None, :] <= s[:, None]).astype(float)
    b = (c[:, None, :] <= t[:, None]).astype(float)
    wb = w @ np.swapaxes(b, -1, -2)
    return np.einsum("mpi,mip->mp", a, wb)


def _calW_at_points(r, c, pts) -> np.ndarray:
    n = r.shape[-1]
    s = np.array([p[0] for p in pts])
    t = np.array([p[1] for p in pts])
    f = centered_indicators(c, t).sum(-1) / math.sqrt(n)
    g = centered_indicators(r, s).sum(-1) / math.sqrt(n)
    return s * f + t * g


# --------------------------------------------------------------------------
# exact decomposition
# --------------------------------------------------------------------------


def anova_check(
    kind, n_values=(8, 32, 128), replicas: int = 100, seed: int = 7, workers: int = 1, grid: GridSpec | None = None
) -> ExperimentResult:
    """Max residual of calT - n s t = calZ + sqrt(n) calW, plus the boundary and monotonicity invariants."""
    kind = EnsembleKind.parse(kind)
    grid = grid or GridSpec.default()
    res = ExperimentResult("anova", {"ensemble": kind.value, "n_values": list(n_values), "replicas": replicas, "seed": seed, "grid": grid})
    s, t = grid.s, grid.t
    for n in n_values:

        def kernel(g, m, n=n):
            w = np.ascontiguousarray(sample_weights(kind, n, g, m))
            r, c = g.random((m, n)), g.random((m, n))
            tv = calT_values(w, r, c, s, t)
            z = calZ_values(w, r, c, s, t)
            wv, _, _ = calW_values(r, c, s, t)
            resid = np.abs(tv - n * s[:, None] * t[None, :] - z - math.sqrt(n) * wv).max(axis=(1, 2))
            edge = np.zeros(m)
            bs = np.isin(s, (0.0, 1.0))
            bt = np.isin(t, (0.0, 1.0))
            if bs.any():
                edge = np.maximum(edge, np.abs(z[:, bs, :]).max(axis=(1, 2)))
            if bt.any():
                edge = np.maximum(edge, np.abs(z[:, :, bt]).max(axis=(1, 2)))
            # calZ = Xi1 - Xi2 with both parts non-decreasing in each coordinate
            xi1 = tv + n * s[:, None] * t[None, :]
            rows = (r[:, None, :] <= s[:, None]).sum(-1)
            cols = (c[:, None, :] <= t[:, None]).sum(-1)
            xi2 = s[:, None] * cols[:, None, :] + t[None, :] * rows[:, :, None]
            tol = 1e-9 * n
            mono = np.ones(m, bool)
            for xi in (xi1, xi2):
                mono &= (np.diff(xi, axis=1) >= -tol).all(axis=(1, 2))
                mono &= (np.diff(xi, axis=2) >= -tol).all(axis=(1, 2))
            split = np.abs(z - (xi1 - xi2)).max(axis=(1, 2))
            return {"resid": resid, "edge": edge, "mono": mono, "split": split}

        out = simulate(kernel, f"anova-{kind.value}", n, replicas, seed, workers)
        worst = float(out["resid"].max())
        res.add_row("anova residual (max)", n, worst, 1e-8 * n)
        res.add_check(f"anova n={n}", worst <= 1e-8 * n, residual=worst, tolerance=1e-8 * n)
        res.add_check(f"tied-down boundary n={n}", float(out["edge"].max()) <= 1e-8 * n, max_abs=float(out["edge"].max()))
        res.add_check(
            f"monotone split n={n}",
            bool(out["mono"].all()) and float(out["split"].max()) <= 1e-8 * n,
            split_residual=float(out["split"].max()),
        )
    return res


# --------------------------------------------------------------------------
# entry moments
# --------------------------------------------------------------------------

_BLOCK_SYMMETRIES = (
    (0, 1, 2, 3),  # identity on (x11, x12, x21, x22)
    (2, 3, 0, 1),  # swap rows
    (1, 0, 3, 2),  # swap columns
    (3, 2, 1, 0),  # both
    (0, 2, 1, 3),  # transpose
    (2, 0, 3, 1),
    (1, 3, 0, 2),
    (3, 1, 2, 0),
)


def _disjoint_blocks(x: np.ndarray) -> tuple[np.ndarray, ...]:
    """Entries of all disjoint 2x2 blocks: four arrays of shape (m, k*k)."""
    m, n = x.shape[0], x.shape[-1]
    k = n // 2
    b = x[:, : 2 * k, : 2 * k].reshape(m, k, 2, k, 2)
    return (
        b[:, :, 0, :, 0].reshape(m, -1),
        b[:, :, 0, :, 1].reshape(m, -1),
        b[:, :, 1, :, 0].reshape(m, -1),
        b[:, :, 1, :, 1].reshape(m, -1),
    )


def moment_experiment(
    kind, n: int = 8, replicas: int = 1_000_000, seed: int = 7, workers: int = 1, max_k: int = 4, z: float = DEFAULT_Z
) -> ExperimentResult:
    """MC of E|X_11|^{2k} (averaged over all entries) and, for the orthogonal
    group, of the four 2x2 block integrals (averaged over disjoint blocks and
    their symmetries)."""
    kind = moments._haar(kind)
    res = ExperimentResult("moments", {"ensemble": kind.value, "n": n, "replicas": replicas, "seed": seed, "z": z})
    patterns = list(moments.ORTHOGONAL_I) if kind is EnsembleKind.HAAR_ORTHOGONAL and n >= 2 else []

    def kernel(g, m):
        x = sample_matrix(kind, n, g, m)
        w = np.abs(x) ** 2
        out = {}
        p = np.ones_like(w)
        for k in range(1, max_k + 1):
            p = p * w
            out[f"m{k}"] = p.mean(axis=(1, 2))
        blocks = _disjoint_blocks(x.real) if patterns else None
        for key in patterns:
            a, b, c, d = moments.orthogonal_I_exponents(key)
            acc = 0.0
            for perm in _BLOCK_SYMMETRIES:
                x11, x12, x21, x22 = (blocks[i] for i in perm)
                acc = acc + (x11**a * x12**b * x21**c * x22**d).mean(axis=1)
            out[f"I{key}"] = acc / len(_BLOCK_SYMMETRIES)
        return out

    out = simulate(kernel, f"moments-{kind.value}", n, replicas, seed, workers)
    sym = "U" if kind is EnsembleKind.HAAR_UNITARY else "O"
    for k in range(1, max_k + 1):
        est = EstimateWithCI.from_samples(out[f"m{k}"], z)
        exact = moments.m2k(kind, n, k)
        name = f"E|{sym}11|^{2 * k}"
        res.add_row(name, n, est, float(exact))
        res.add_check(name, est.agrees(float(exact)), exact=str(exact), estimate=est.mean, se=est.std_error, zscore=est.zscore(float(exact)))
    for key in patterns:
        est = EstimateWithCI.from_samples(out[f"I{key}"], IDENTITY_Z)
        exact = moments.orthogonal_I_exact(key, n)
        name = "I" + str(key).replace(" ", "")
        res.add_row(name, n, est, float(exact))
        res.add_check(name, est.agrees(float(exact)), exact=str(exact), estimate=est.mean, se=est.std_error, zscore=est.zscore(float(exact)))
    return res


def orthogonal_I_scalings(n: int = 64, rel_tol: float = 0.15) -> ExperimentResult:
    """n^p I_n against the leading coefficients (9, 1, 3, 1)."""
    res = ExperimentResult("I-scalings", {"n": n, "rel_tol": rel_tol})
    for key, (fn, power, label, _) in moments.ORTHOGONAL_I.items():
        coef, _ = moments.orthogonal_I_leading(key)
        scaled = float(fn(n)) * n**power
        res.add_row(f"n^{power} I{key}", n, scaled, coef)
        res.add_check(f"scaling {label}", abs(scaled / coef - 1) <= rel_tol, scaled=scaled, leading=coef)
    return res


# --------------------------------------------------------------------------
# quadratic form S-hat and the characteristic-function identity
# --------------------------------------------------------------------------


def _v_matrix(kind, n, g, m):
    w = sample_weights(kind, n, g, m)
    return np.asarray(w, dtype=float) - 1.0 / n


def shat_experiment(
    n_values=(16, 50, 128), replicas: int = 10_000, kind="unitary", seed: int = 7, workers: int = 1, z: float = DEFAULT_Z
) -> ExperimentResult:
    """S-hat = sum_j (sum_i V_ij X_i)^2: mean against n^2 Var|X11|^2, variance shrinking in n."""
    kind = EnsembleKind.parse(kind)
    res = ExperimentResult("shat", {"ensemble": kind.value, "n_values": list(n_values), "replicas": replicas, "seed": seed, "z": z})
    variances = []
    for n in n_values:

        def kernel(g, m, n=n):
            v = _v_matrix(kind, n, g, m)
            x = g.standard_normal((m, n))
            y = np.einsum("mi,mij->mj", x, v)
            return {"shat": (y * y).sum(-1)}

        sh = simulate(kernel, f"shat-{kind.value}", n, replicas, seed, workers)["shat"]
        est = EstimateWithCI.from_samples(sh, z)
        var = float(sh.var(ddof=1))
        variances.append(var)
        if kind.is_haar:
            oracle = float(moments.scaled_var_v(n, kind))
        else:
            oracle = 0.0
        res.add_row("mean S-hat", n, est, oracle)
        res.add_row("var S-hat", n, var)
        res.add_check(f"mean S-hat n={n}", est.agrees(oracle), estimate=est.mean, se=est.std_error, oracle=oracle, zscore=est.zscore(oracle))
    if kind.is_haar and len(variances) > 1:
        res.add_check("var S-hat decreasing", all(a > b for a, b in zip(variances, variances[1:])), variances=variances)
    return res


def char_function_identity(
    n: int = 32, replicas: int = 100_000, kind="unitary", thetas=(0.5, 1.0, 2.0), seed: int = 7, workers: int = 1,
    z: float = IDENTITY_Z,
) -> ExperimentResult:
    """E exp(i theta Sigma) against E exp(-theta^2/2 (n^{-1}(sum X)^2 + S-hat)).

    Conditional on (U, X), Sigma = X^T W Y is centred normal with exactly that
    variance, so the per-replica difference cos(theta Sigma) - exp(...) has
    mean zero; its standard error is the combined SE of the two sides.
    """
    kind = EnsembleKind.parse(kind)
    thetas = [float(th) for th in thetas]
    res = ExperimentResult("charfun", {"ensemble": kind.value, "n": n, "replicas": replicas, "thetas": thetas, "seed": seed, "z": z})

    def kernel(g, m):
        w = np.asarray(sample_weights(kind, n, g, m), dtype=float)
        x = g.standard_normal((m, n))
        y = g.standard_normal((m, n))
        xw = np.einsum("mi,mij->mj", x, w)
        sigma = (xw * y).sum(-1)
        xv = xw - x.sum(-1, keepdims=True) / n
        q = x.sum(-1) ** 2 / n + (xv * xv).sum(-1)
        return {"sigma": sigma, "q": q}

    out = simulate(kernel, f"charfun-{kind.value}", n, replicas, seed, workers)
    sig, q = out["sigma"], out["q"]
    for th in [0.0] + thetas:
        lhs = np.cos(th * sig)
        rhs = np.exp(-0.5 * th * th * q)
        diff = EstimateWithCI.from_samples(lhs - rhs, z)
        imag = EstimateWithCI.from_samples(np.sin(th * sig), z)
        res.add_row(f"Re lhs theta={th:g}", n, EstimateWithCI.from_samples(lhs, z), float(rhs.mean()))
        res.add_row(f"Re lhs-rhs theta={th:g}", n, diff, 0.0)
        res.add_row(f"Im lhs theta={th:g}", n, imag, 0.0)
        res.add_check(f"real part theta={th:g}", diff.agrees(0.0), estimate=diff.mean, se=diff.std_error)
        res.add_check(f"imaginary part theta={th:g}", imag.agrees(0.0), estimate=imag.mean, se=imag.std_error)
    return res


# --------------------------------------------------------------------------
# covariances of calZ, calT and calW
# --------------------------------------------------------------------------


def _kernel_points(kind: EnsembleKind, n: int, pts: Sequence[Point], brute: bool = False):
    def kernel(g, m):
        w = np.asarray(sample_weights(kind, n, g, m), dtype=float)
        r, c = g.random((m, n)), g.random((m, n))
        if brute:
            z = np.empty((m, len(pts)))
            for k, (s, t) in enumerate(pts):
                a = (r <= s) - s
                b = (c <= t) - t
                z[:, k] = (w * a[:, :, None] * b[:, None, :]).sum(axis=(1, 2))
            return {"z": z}
        return {
            "z": _z_at_points(w, r, c, pts),
            "T": _calT_at_points(w, r, c, pts),
            "W": _calW_at_points(r, c, pts),
        }

    return kernel


def estimate_z_covariance(cfg: ExperimentConfig, points: Sequence[PointPair] = STANDARD_PAIRS) -> ExperimentResult:
    """E[calZ(p) calZ(q)] against g(s,s') g(t,t') K_n, plus E[calZ(p) calW(q)] = 0.

    calZ has mean zero exactly, so the mean product is the covariance.  For
    permutations the estimate is reported for n^{-1/2} calZ.
    """
    kind = cfg.ensemble
    res = ExperimentResult("z-covariance", cfg.provenance())
    pts = _points_of(points)
    idx = {p: i for i, p in enumerate(pts)}
    for n in cfg.n_values:
        out = simulate(_kernel_points(kind, n, pts), f"zcov-{kind.value}", n, cfg.replicas, cfg.seed, cfg.workers, cfg.block_size)
        scale = 1.0 / n if kind is EnsembleKind.PERMUTATION else 1.0
        label = "cov n^-1/2 calZ" if scale != 1.0 else "cov calZ"
        for p, q in points:
            p, q = tuple(map(float, p)), tuple(map(float, q))
            prod = out["z"][:, idx[p]] * out["z"][:, idx[q]] * scale
            est = EstimateWithCI.from_samples(prod, cfg.z)
            oracle = limits.finite_n_z_cov(n, kind, p, q) * scale
            res.add_row(label, n, est, oracle, (p, q))
            res.add_check(f"{label} n={n} {p},{q}", est.agrees(oracle), estimate=est.mean, se=est.std_error, oracle=oracle, zscore=est.zscore(oracle))
            for a, b in ((p, q), (q, p)):
                cross = EstimateWithCI.from_samples(out["z"][:, idx[a]] * out["W"][:, idx[b]], IDENTITY_Z)
                res.add_row("cross calZ*calW", n, cross, 0.0, (a, b))
                res.add_check(f"cross calZ*calW n={n} {a},{b}", cross.agrees(0.0), estimate=cross.mean, se=cross.std_error)
    return res


def validate_z_oracle(
    kinds=tuple(EnsembleKind), n: int = 8, replicas: int = 1_000_000, seed: int = 7, workers: int = 1,
    points: Sequence[PointPair] = STANDARD_PAIRS, z: float = DEFAULT_Z,
) -> ExperimentResult:
    """Brute-force check of the finite-n calZ kernel: explicit double sums, no factoring."""
    res = ExperimentResult("z-oracle", {"kinds": [EnsembleKind.parse(k).value for k in kinds], "n": n, "replicas": replicas, "seed": seed, "z": z})
    pts = _points_of(points)
    idx = {p: i for i, p in enumerate(pts)}
    for kind in map(EnsembleKind.parse, kinds):
        out = simulate(_kernel_points(kind, n, pts, brute=True), f"zoracle-{kind.value}", n, replicas, seed, workers)
        for p, q in points:
            p, q = tuple(map(float, p)), tuple(map(float, q))
            est = EstimateWithCI.from_samples(out["z"][:, idx[p]] * out["z"][:, idx[q]], z)
            oracle = limits.finite_n_z_cov(n, kind, p, q)
            res.add_row(f"brute cov calZ {kind.value}", n, est, oracle, (p, q))
            res.add_check(f"oracle {kind.value} {p},{q}", est.agrees(oracle), estimate=est.mean, se=est.std_error, oracle=oracle, zscore=est.zscore(oracle))
    return res


def estimate_calT_covariance(cfg: ExperimentConfig, points: Sequence[PointPair] = STANDARD_PAIRS) -> ExperimentResult:
    """Covariance of n^{-1/2}(calT - n s t) against the calW kernel plus K_n/n times the tied-down kernel."""
    kind = cfg.ensemble
    res = ExperimentResult("calT-covariance", cfg.provenance())
    pts = _points_of(points)
    idx = {p: i for i, p in enumerate(pts)}
    for n in cfg.n_values:
        out = simulate(_kernel_points(kind, n, pts), f"tcov-{kind.value}", n, cfg.replicas, cfg.seed, cfg.workers, cfg.block_size)
        centred = (out["T"] - n * np.array([s * t for s, t in pts])) / math.sqrt(n)
        for p, q in points:
            p, q = tuple(map(float, p)), tuple(map(float, q))
            est = EstimateWithCI.from_samples(centred[:, idx[p]] * centred[:, idx[q]], cfg.z)
            oracle = limits.finite_n_calT_cov(n, kind, p, q)
            res.add_row("cov n^-1/2 calT", n, est, oracle, (p, q))
            res.add_check(f"cov calT n={n} {p},{q}", est.agrees(oracle), estimate=est.mean, se=est.std_error, oracle=oracle, zscore=est.zscore(oracle))
            if kind is EnsembleKind.PERMUTATION:
                limit = limits.CovKernel2D(limits.KernelKind.BIVARIATE_BRIDGE)(p, q)
                res.add_check(f"permutation kernel equals B00 {p},{q}", abs(limit - oracle) <= 1e-12, limit=limit, oracle=oracle)
    return res


# --------------------------------------------------------------------------
# one-point marginals
# --------------------------------------------------------------------------


def _check_interior(s: float, t: float) -> None:
    if not (0 < s < 1 and 0 < t < 1):
        raise ValueError(f"marginal checks need 0 < s, t < 1, got ({s}, {t})")


def _marginal_kernel(kind: EnsembleKind, n: int, s: float, t: float, point_T: Point):
    """calZ(s, t) and calT at ``point_T`` from the same replicas."""

    def kernel(g, m):
        if kind is EnsembleKind.DFT:
            # flat moduli: calZ = (sum_i a_i)(sum_j b_j) / n and calT = #rows #cols / n
            r, c = g.random((m, n)), g.random((m, n))
            z = ((r <= s) - s).sum(-1) * ((c <= t) - t).sum(-1) / n
            tv = (r <= point_T[0]).sum(-1) * (c <= point_T[1]).sum(-1) / n
            return {"z": z, "T": tv.astype(float)}
        if kind is EnsembleKind.PERMUTATION:
            # calT = #{i : R_i <= s, C_pi(i) <= t}
            perm = sample_permutation_indices(n, g, m)
            r, c = g.random((m, n)), g.random((m, n))
            cp = np.take_along_axis(c, perm, axis=1)
            z = (((r <= s) - s) * ((cp <= t) - t)).sum(-1)
            tv = ((r <= point_T[0]) & (cp <= point_T[1])).sum(-1)
            return {"z": z, "T": tv.astype(float)}
        w = np.asarray(sample_weights(kind, n, g, m), dtype=float)
        r, c = g.random((m, n)), g.random((m, n))
        pts = [(s, t), point_T]
        return {"z": _z_at_points(w, r, c, pts)[:, 0], "T": _calT_at_points(w, r, c, pts)[:, 1]}

    return kernel


def marginal_ks(
    n: int = 200, replicas: int = 5000, kind="unitary", s: float = 0.5, t: float = 0.5, seed: int = 7, workers: int = 1
) -> tuple[KsResult, ExperimentResult]:
    """KS of calZ(s,t) / sqrt(s(1-s)t(1-t)) against the law of a N1 + N2 N3."""
    kind = EnsembleKind.parse(kind)
    _check_interior(s, t)
    a = limits.mixing_scale(kind)
    out = simulate(_marginal_kernel(kind, n, s, t, (0.5, 0.5)), f"marginal-{kind.value}-{s!r}-{t!r}", n, replicas, seed, workers)
    x = out["z"] / math.sqrt(s * (1 - s) * t * (1 - t))
    law = limits.MarginalLimitLaw(a)
    ks = ks_1samp(x, law.cdf)
    res = ExperimentResult("marginal-calZ", {"ensemble": kind.value, "n": n, "replicas": replicas, "s": s, "t": t, "a": a, "seed": seed})
    res.add_row("KS statistic", n, ks.statistic, None, ((s, t), (s, t)))
    res.add_row("KS p-value", n, ks.p_value, None, ((s, t), (s, t)))
    res.add_row("second moment", n, EstimateWithCI.from_samples(x * x), law.variance * _z_finite_factor(kind, n), ((s, t), (s, t)))
    res.add_check(f"KS calZ {kind.value} n={n}", ks.passed(), statistic=ks.statistic, p_value=ks.p_value, a=a)
    return ks, res


def _z_finite_factor(kind: EnsembleKind, n: int) -> float:
    # exact E[calZ^2] / (g g) is K_n; the limit law has variance a^2 + 1
    k = float(limits.z_moment_constant(n, kind))
    limit = limits.MarginalLimitLaw(limits.mixing_scale(kind)).variance
    return k / limit


def calT_marginal_ks(
    n: int = 200, replicas: int = 5000, kind="unitary", s: float = 0.5, t: float = 0.5, seed: int = 7, workers: int = 1
) -> tuple[KsResult, ExperimentResult]:
    """KS of n^{-1/2}(calT(s,t) - n s t) against the centred normal with the exact finite-n variance."""
    kind = EnsembleKind.parse(kind)
    _check_interior(s, t)
    out = simulate(_marginal_kernel(kind, n, s, t, (s, t)), f"calT-marginal-{kind.value}-{s!r}-{t!r}", n, replicas, seed, workers)
    x = (out["T"] - n * s * t) / math.sqrt(n)
    var = limits.finite_n_calT_cov(n, kind, (s, t), (s, t))
    ks = ks_1samp(x, lambda v: stats.norm.cdf(v, scale=math.sqrt(var)))
    res = ExperimentResult("marginal-calT", {"ensemble": kind.value, "n": n, "replicas": replicas, "s": s, "t": t, "variance": var, "seed": seed})
    res.add_row("KS statistic", n, ks.statistic, None, ((s, t), (s, t)))
    res.add_row("KS p-value", n, ks.p_value, None, ((s, t), (s, t)))
    res.add_row("variance", n, EstimateWithCI.from_samples(x * x), var, ((s, t), (s, t)))
    res.add_check(f"KS calT {kind.value} n={n}", ks.passed(), statistic=ks.statistic, p_value=ks.p_value, variance=var)
    return ks, res


def marginal_pair_ks(
    n: int = 200, replicas: int = 5000, kind="unitary", s: float = 0.5, t: float = 0.5, seed: int = 7, workers: int = 1
) -> tuple[KsResult, KsResult, ExperimentResult]:
    """Both one-point tests from a single set of Haar replicas (calT taken at (1/2, 1/2))."""
    kind = EnsembleKind.parse(kind)
    _check_interior(s, t)
    out = simulate(_marginal_kernel(kind, n, s, t, (0.5, 0.5)), f"marginal-pair-{kind.value}-{s!r}-{t!r}", n, replicas, seed, workers)
    a = limits.mixing_scale(kind)
    xz = out["z"] / math.sqrt(s * (1 - s) * t * (1 - t))
    ks_z = ks_1samp(xz, limits.MarginalLimitLaw(a).cdf)
    xt = (out["T"] - n / 4) / math.sqrt(n)
    var = limits.finite_n_calT_cov(n, kind, (0.5, 0.5), (0.5, 0.5))
    ks_t = ks_1samp(xt, lambda v: stats.norm.cdf(v, scale=math.sqrt(var)))
    res = ExperimentResult("marginal-pair", {"ensemble": kind.value, "n": n, "replicas": replicas, "s": s, "t": t, "a": a, "seed": seed})
    res.add_row("KS calZ statistic", n, ks_z.statistic, None, ((s, t), (s, t)))
    res.add_row("KS calZ p-value", n, ks_z.p_value, None, ((s, t), (s, t)))
    res.add_row("KS calT statistic", n, ks_t.statistic, None, ((0.5, 0.5), (0.5, 0.5)))
    res.add_row("KS calT p-value", n, ks_t.p_value, None, ((0.5, 0.5), (0.5, 0.5)))
    res.add_row("calT variance", n, EstimateWithCI.from_samples(xt * xt), var, ((0.5, 0.5), (0.5, 0.5)))
    res.add_check(f"KS calZ {kind.value} n={n}", ks_z.passed(), statistic=ks_z.statistic, p_value=ks_z.p_value, a=a)
    res.add_check(f"KS calT {kind.value} n={n}", ks_t.passed(), statistic=ks_t.statistic, p_value=ks_t.p_value, variance=var)
    return ks_z, ks_t, res


def first_column_ks(n: int = 16, replicas: int = 10_000, kind="unitary", seed: int = 7, workers: int = 1) -> tuple[KsResult, ExperimentResult]:
    """|X_11|^2 from full QR-based samples against Beta(b, (n-1) b)."""
    kind = moments._haar(kind)
    b = float(kind.beta_prime)

    def kernel(g, m):
        return {"u": np.abs(sample_matrix(kind, n, g, m)[:, 0, 0]) ** 2}

    u = simulate(kernel, f"first-column-{kind.value}", n, replicas, seed, workers)["u"]
    ks = ks_1samp(u, stats.beta(b, (n - 1) * b).cdf)
    res = ExperimentResult("first-column", {"ensemble": kind.value, "n": n, "replicas": replicas, "seed": seed})
    res.add_row("KS statistic", n, ks.statistic)
    res.add_row("KS p-value", n, ks.p_value)
    res.add_check(f"first column Beta law {kind.value}", ks.passed(), statistic=ks.statistic, p_value=ks.p_value)
    return ks, res


# --------------------------------------------------------------------------
# Lindeberg swap
# --------------------------------------------------------------------------


def lindeberg_compare(
    n_values=(16, 64, 256), replicas: int = 5000, kind="unitary", s: float = 0.05, t: float = 0.05, seed: int = 7,
    workers: int = 1, max_distance: float = 0.05, with_twin: bool = False,
) -> ExperimentResult:
    """Two-sample KS between A_n = R^T W C (standardised Bernoulli selectors)
    and B_n = X^T W Y (Gaussians), with independent matrices for the two.

    Also reports n^2 E(Lambda_n^3), Lambda_j = sum_i W_ij R_i, averaged over
    all columns j, against its exact value n^3 E|X_11|^6 E R^3.
    """
    kind = EnsembleKind.parse(kind)
    _check_interior(s, t)
    res = ExperimentResult(
        "lindeberg", {"ensemble": kind.value, "n_values": list(n_values), "replicas": replicas, "s": s, "t": t, "seed": seed}
    )
    ss, st = math.sqrt(s * (1 - s)), math.sqrt(t * (1 - t))
    skew_r = (1 - 2 * s) / ss

    def a_kernel(n):
        def kernel(g, m):
            w = np.asarray(sample_weights(kind, n, g, m), dtype=float)
            r = ((g.random((m, n)) <= s) - s) / ss
            c = ((g.random((m, n)) <= t) - t) / st
            lam = np.einsum("mi,mij->mj", r, w)
            return {"A": (lam * c).sum(-1), "lam3": (lam**3).mean(-1) * n * n}

        return kernel

    def b_kernel(n):
        def kernel(g, m):
            w = np.asarray(sample_weights(kind, n, g, m), dtype=float)
            x, y = g.standard_normal((m, n)), g.standard_normal((m, n))
            return {"B": np.einsum("mi,mij,mj->m", x, w, y)}

        return kernel

    dists, lam_est = [], []
    for n in n_values:
        a = simulate(a_kernel(n), f"lindeberg-A-{kind.value}", n, replicas, seed, workers)
        b = simulate(b_kernel(n), f"lindeberg-B-{kind.value}", n, replicas, seed, workers)["B"]
        ks = ks_2samp(a["A"], b)
        dists.append(ks.statistic)
        res.add_row("KS(A,B) statistic", n, ks.statistic, None, ((s, t), (s, t)))
        lam = EstimateWithCI.from_samples(a["lam3"])
        exact = None
        if kind.is_haar:
            exact = float(n**3 * moments.m2k(kind, n, 3)) * skew_r
        elif kind is EnsembleKind.DFT:
            exact = skew_r / n  # Lambda = n^{-1} sum_i R_i
        lam_est.append(lam.mean)
        res.add_row("n^2 E Lambda^3", n, lam, exact, ((s, t), (s, t)))
        if with_twin:
            twin = simulate(a_kernel(n), f"lindeberg-A2-{kind.value}", n, replicas, seed, workers)["A"]
            ks2 = ks_2samp(a["A"], twin)
            res.add_row("KS(A,A') p-value", n, ks2.p_value)
            res.add_check(f"A vs independent A' n={n}", ks2.passed(), statistic=ks2.statistic, p_value=ks2.p_value)
    res.add_check("KS(A,B) decreasing", all(x > y for x, y in zip(dists, dists[1:])), distances=dists)
    res.add_check(f"KS(A,B) < {max_distance} at n={n_values[-1]}", dists[-1] < max_distance, distance=dists[-1])
    mags = [abs(v) for v in lam_est]
    stable = min(mags) > 0 and max(mags) / min(mags) <= 2.0
    res.add_check("n^2 |E Lambda^3| stable within factor 2", stable, values=lam_est)
    return res


# --------------------------------------------------------------------------
# one-dimensional checks (first column / Dirichlet vector)
# --------------------------------------------------------------------------


def dirichlet_onedim_checks(
    n: int = 200, replicas: int = 100_000, beta_prime=1, s: float = 0.5, seed: int = 7, workers: int = 1, z: float = DEFAULT_Z
) -> ExperimentResult:
    """Variances of sqrt(n) B0(s) and of sqrt(n) calB0(s) for Haar first columns and Dirichlet vectors.

    The deterministic-index bridge is checked against k(n-k)/(n(n b + 1)).
    The weighted empirical bridge is checked against its limit (1 + 1/b)
    s(1-s) and against the exact finite-n value s(1-s) n (b+1)/(n b + 1).  The weight average
    n^{-1} sum (n u_i)^2 is checked against its exact mean n (b+1)/(n b + 1)
    and reported next to its limit 1 + 1/b.
    """
    bp = float(beta_prime)
    if bp not in (0.5, 1.0):
        raise ValueError("beta_prime must be 1/2 or 1 (a Haar column)")
    kind = EnsembleKind.HAAR_UNITARY if bp == 1.0 else EnsembleKind.HAAR_ORTHOGONAL
    k = int(math.floor(n * s + 1e-9))
    res = ExperimentResult("onedim", {"n": n, "replicas": replicas, "beta_prime": bp, "s": s, "seed": seed, "z": z})
    det_oracle = k * (n - k) / (n * (n * bp + 1))
    emp_exact = s * (1 - s) * n * (bp + 1) / (n * bp + 1)
    emp_limit = (1 + 1 / bp) * s * (1 - s)
    wt_exact = n * (bp + 1) / (n * bp + 1)
    wt_limit = 1 + 1 / bp

    def kernel_for(source):
        def kernel(g, m):
            if source == "column":
                u = np.abs(sample_haar_column(n, kind, g, m)) ** 2
            else:
                u = sample_dirichlet(n, bp, g, m)
            r = g.random((m, n))
            det = math.sqrt(n) * (u[:, :k].sum(-1) - k / n)
            emp = math.sqrt(n) * (u * ((r <= s) - s)).sum(-1)
            return {"det2": det * det, "emp2": emp * emp, "wt": n * (u * u).sum(-1)}

        return kernel

    for source in ("column", "dirichlet"):
        out = simulate(kernel_for(source), f"onedim-{source}-{bp!r}", n, replicas, seed, workers)
        det = EstimateWithCI.from_samples(out["det2"], z)
        emp = EstimateWithCI.from_samples(out["emp2"], z)
        wt = EstimateWithCI.from_samples(out["wt"], z)
        pts = ((s, None), (s, None))
        res.add_row(f"var sqrt(n) B0 [{source}]", n, det, det_oracle, pts)
        res.add_row(f"var sqrt(n) calB0 [{source}] vs exact", n, emp, emp_exact, pts)
        res.add_row(f"var sqrt(n) calB0 [{source}] vs limit", n, emp, emp_limit, pts)
        res.add_row(f"weight mean [{source}] vs exact", n, wt, wt_exact)
        res.add_row(f"weight mean [{source}] vs limit", n, wt, wt_limit)
        res.add_check(f"B0 variance [{source}]", det.agrees(det_oracle), estimate=det.mean, se=det.std_error, oracle=det_oracle, zscore=det.zscore(det_oracle))
        res.add_check(f"calB0 variance exact [{source}]", emp.agrees(emp_exact), estimate=emp.mean, se=emp.std_error, oracle=emp_exact, zscore=emp.zscore(emp_exact))
        res.add_check(f"weight mean exact [{source}]", wt.agrees(wt_exact), estimate=wt.mean, se=wt.std_error, oracle=wt_exact, zscore=wt.zscore(wt_exact))
        res.add_check(f"calB0 variance limit [{source}]", emp.agrees(emp_limit), estimate=emp.mean, se=emp.std_error, oracle=emp_limit, zscore=emp.zscore(emp_limit))
    return res


# --------------------------------------------------------------------------
# spacings
# --------------------------------------------------------------------------


def sup_window_count(c: np.ndarray, width: float) -> np.ndarray:
    """max over t of #{j : t < C_j <= t + width}, per row of ``c``."""
    c = np.sort(c, axis=-1)
    ends = c + width
    counts = np.empty(c.shape[0], dtype=int)
    for i in range(c.shape[0]):
        counts[i] = (np.searchsorted(c[i], ends[i], side="right") - np.arange(c.shape[1])).max()
    return counts


def spacings_diagnostics(
    n_values=(100, 1000, 10_000), replicas: int = 2000, n_dirichlet: int = 20, k: int = 3, r: int = 4,
    replicas_dirichlet: int = 100_000, seed: int = 7, workers: int = 1, ratio_factor: float = 3.0,
) -> ExperimentResult:
    """Window counts N_n(t, 1/n) and the Dirichlet law of uniform spacings.

    With C_(0) = 0 and C_(n+1) = 1, the n + 1 spacings of n uniforms are
    Dirichlet(1, ..., 1), so C_(k+r) - C_(k) has the law of
    (g_1 + ... + g_r) / (g_1 + ... + g_{n+1}) for iid unit exponentials g.
    """
    res = ExperimentResult(
        "spacings",
        {"n_values": list(n_values), "replicas": replicas, "n_dirichlet": n_dirichlet, "k": k, "r": r,
         "replicas_dirichlet": replicas_dirichlet, "seed": seed},
    )
    ratios = []
    for n in n_values:

        def kernel(g, m, n=n):
            return {"count": sup_window_count(g.random((m, n)), 1.0 / n).astype(float)}

        cnt = simulate(kernel, "window-count", n, replicas, seed, workers, block_size=max(1, min(1024, (1 << 22) // n)))["count"]
        est = EstimateWithCI.from_samples(cnt)
        ratio = est.mean / math.log(n)
        ratios.append(ratio)
        res.add_row("mean sup window count", n, est)
        res.add_row("mean / log n", n, ratio)
        if n == 100:
            res.add_check("window count mean in [2, 20] at n=100", 2 <= est.mean <= 20, mean=est.mean)
    res.add_check(f"mean / log n within factor {ratio_factor}", max(ratios) / min(ratios) <= ratio_factor, ratios=ratios)

    nd = n_dirichlet
    if not (0 <= k and 1 <= r and k + r <= nd + 1):
        raise ValueError("need 0 <= k, r >= 1 and k + r <= n + 1")

    def spacing_kernel(g, m):
        c = np.sort(g.random((m, nd)), axis=-1)
        c = np.concatenate([np.zeros((m, 1)), c, np.ones((m, 1))], axis=1)
        return {"spacing": c[:, k + r] - c[:, k]}

    def gamma_kernel(g, m):
        e = sample_gamma(1, g, (m, nd + 1))
        return {"ratio": e[:, :r].sum(-1) / e.sum(-1)}

    sp = simulate(spacing_kernel, "spacings-uniform", nd, replicas_dirichlet, seed, workers)["spacing"]
    gm = simulate(gamma_kernel, "spacings-gamma", nd, replicas_dirichlet, seed, workers)["ratio"]
    ks = ks_2samp(sp, gm)
    res.add_row("KS spacings vs gamma ratio p-value", nd, ks.p_value)
    res.add_check(f"Dirichlet spacings n={nd} k={k} r={r}", ks.passed(), statistic=ks.statistic, p_value=ks.p_value)
    return res


# --------------------------------------------------------------------------
# H = V V^T identities
# --------------------------------------------------------------------------


def _h_stats(v: np.ndarray) -> dict:
    n = v.shape[-1]
    v2 = v * v
    s4 = (v2 * v2).sum(axis=(1, 2))
    rows = (v2.sum(-1) ** 2).sum(-1)
    cols = (v2.sum(-2) ** 2).sum(-1)
    tot = v2.sum(axis=(1, 2)) ** 2
    h = v @ np.swapaxes(v, -1, -2)
    dh = np.diagonal(h, axis1=1, axis2=2)
    h2 = (h * h).sum(axis=(1, 2))
    nn = n * (n - 1)
    return {
        "V11^4": s4 / n**2,
        "V11^2V12^2": (rows - s4) / (n * nn),
        "V11^2V21^2": (cols - s4) / (n * nn),
        "V11^2V22^2": (tot - rows - cols + s4) / nn**2,
        "V11V12V21V22": (h2 - (dh * dh).sum(-1) - cols + s4) / nn**2,
        "H11^2": (dh * dh).mean(-1),
        "H11H22": (dh.sum(-1) ** 2 - (dh * dh).sum(-1)) / nn,
        "H12^2": (h2 - (dh * dh).sum(-1)) / nn,
        "_h": h,
    }


def h_identity_checks(n: int = 16, replicas: int = 100_000, kind="unitary", seed: int = 7, workers: int = 1, z: float = IDENTITY_Z) -> ExperimentResult:
    """The three H-moment identities and the four-term split of E S-hat^2.

    Left and right sides come from independent replica sets (different
    stream tags), compared with their combined standard error.
    """
    kind = EnsembleKind.parse(kind)
    res = ExperimentResult("h-identities", {"ensemble": kind.value, "n": n, "replicas": replicas, "seed": seed, "z": z})

    def lhs_kernel(g, m):
        st = _h_stats(_v_matrix(kind, n, g, m))
        x = g.standard_normal((m, n))
        shat = np.einsum("mi,mij,mj->m", x, st["_h"], x)
        four = n * (n - 1) * st["H11H22"] + 2 * n * (n - 1) * st["H12^2"] + 3 * n * st["H11^2"]
        return {"H11^2": st["H11^2"], "H11H22": st["H11H22"], "H12^2": st["H12^2"], "shat2": shat * shat, "four": four}

    def rhs_kernel(g, m):
        st = _h_stats(_v_matrix(kind, n, g, m))
        nn = n * (n - 1)
        return {
            "h1": n * st["V11^4"] + nn * st["V11^2V12^2"],
            "h2": n * st["V11^2V21^2"] + nn * st["V11^2V22^2"],
            "h3": n * st["V11^2V21^2"] + nn * st["V11V12V21V22"],
            "four": n * (n - 1) * st["H11H22"] + 2 * n * (n - 1) * st["H12^2"] + 3 * n * st["H11^2"],
        }

    lhs = simulate(lhs_kernel, f"h-lhs-{kind.value}", n, replicas, seed, workers)
    rhs = simulate(rhs_kernel, f"h-rhs-{kind.value}", n, replicas, seed, workers)

    def compare(name, a, b):
        ea, eb = EstimateWithCI.from_samples(a, z), EstimateWithCI.from_samples(b, z)
        se = math.hypot(ea.std_error, eb.std_error)
        diff = EstimateWithCI(ea.mean - eb.mean, se, ea.replicas, z)
        res.add_row(name + " lhs", n, ea, eb.mean)
        res.add_row(name + " lhs-rhs", n, diff, 0.0)
        res.add_check(name, diff.agrees(0.0), lhs=ea.mean, rhs=eb.mean, se=se)

    compare("h1 E H11^2", lhs["H11^2"], rhs["h1"])
    compare("h2 E H11 H22", lhs["H11H22"], rhs["h2"])
    compare("h3 E H12^2", lhs["H12^2"], rhs["h3"])
    compare("E S-hat^2 four-term split", lhs["shat2"], rhs["four"])
    return res


def product_v_check(n: int = 64, replicas: int = 5000, kind="unitary", seed: int = 7, workers: int = 1, z: float = IDENTITY_Z, band: float = 0.3) -> ExperimentResult:
    """n^2 (n-1)^2 E(V11^2 V22^2) near its limit (1 or 4): the z-SE interval must meet [(1-band) L, (1+band) L]."""
    kind = moments._haar(kind)
    lim, cross_lim = moments.product_v_limits(kind)
    res = ExperimentResult("product-v", {"ensemble": kind.value, "n": n, "replicas": replicas, "seed": seed, "z": z, "band": band})

    def kernel(g, m):
        st = _h_stats(_v_matrix(kind, n, g, m))
        c = (n * (n - 1)) ** 2
        return {"diag": c * st["V11^2V22^2"], "cross": c * st["V11V12V21V22"]}

    out = simulate(kernel, f"product-v-{kind.value}", n, replicas, seed, workers)
    d = EstimateWithCI.from_samples(out["diag"], z)
    c = EstimateWithCI.from_samples(out["cross"], z)
    res.add_row("n^2(n-1)^2 E V11^2 V22^2", n, d, lim)
    res.add_row("n^2(n-1)^2 E V11 V12 V21 V22", n, c, cross_lim)
    lo, hi = d.interval
    res.add_check("diagonal term near limit", hi >= (1 - band) * lim and lo <= (1 + band) * lim, estimate=d.mean, se=d.std_error, limit=lim)
    return res


# --------------------------------------------------------------------------
# n^{-1/2} calZ -> 0
# --------------------------------------------------------------------------


def max_grid_median(
    n_values=(16, 64, 256), replicas: int = 2000, kind="unitary", seed: int = 7, workers: int = 1, grid: GridSpec | None = None
) -> ExperimentResult:
    """Median over replicas of max_grid |n^{-1/2} calZ|; must strictly decrease in n."""
    kind = EnsembleKind.parse(kind)
    grid = grid or GridSpec.default()
    res = ExperimentResult("max-grid-median", {"ensemble": kind.value, "n_values": list(n_values), "replicas": replicas, "seed": seed, "grid": grid})
    medians = []
    for n in n_values:

        def kernel(g, m, n=n):
            w = np.asarray(sample_weights(kind, n, g, m), dtype=float)
            r, c = g.random((m, n)), g.random((m, n))
            z = calZ_values(w, r, c, grid.s, grid.t)
            return {"max": np.abs(z).max(axis=(1, 2)) / math.sqrt(n)}

        x = np.sort(simulate(kernel, f"maxgrid-{kind.value}", n, replicas, seed, workers)["max"])
        med = float(np.median(x))
        # distribution-free SE from the order statistics one binomial sd either side
        m = x.size
        lo = x[max(0, int(math.floor(m / 2 - math.sqrt(m) / 2)))]
        hi = x[min(m - 1, int(math.ceil(m / 2 + math.sqrt(m) / 2)))]
        medians.append(med)
        res.add_row("median max |n^-1/2 calZ|", n, EstimateWithCI(med, float(hi - lo) / 2, m))
    res.add_check("median strictly decreasing", all(a > b for a, b in zip(medians, medians[1:])), medians=medians)
    return res


# --------------------------------------------------------------------------
# KS p-value self test
# --------------------------------------------------------------------------


def ks_pvalue_selftest(tests: int = 500, size: int = 1000, bins: int = 10, seed: int = 7) -> ExperimentResult:
    """KS p-values of uniform samples against the uniform CDF should be uniform."""
    g = experiment_stream(seed, "ks-selftest", size).generator()
    pv = np.array([ks_1samp(g.random(size), lambda x: x).p_value for _ in range(tests)])
    counts = np.histogram(pv, bins=bins, range=(0, 1))[0]
    chi = stats.chisquare(counts)
    res = ExperimentResult("ks-selftest", {"tests": tests, "size": size, "bins": bins, "seed": seed})
    res.add_row("chi-square p-value", size, float(chi.pvalue))
    res.add_check("p-values uniform", chi.pvalue > KS_ALPHA, counts=counts.tolist(), p_value=float(chi.pvalue))
    return res

