"""Truncation statistics of a weight matrix evaluated on an (s, t) grid.

All processes are right-continuous step functions and are sampled exactly at
grid points.  The array-level helpers (``*_values``) accept either a single
weight matrix (n, n) with draws (n,) or a batch (b, n, n) with draws (b, n),
and return arrays shaped (..., len(s_points), len(t_points)).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ensembles import RngLike, WeightMatrix, as_generator

# guards floor(n * s) against 0.29 * 100 == 28.999999999999996
_FLOOR_EPS = 1e-9

TWO_PARAMETER = ("T", "CalT", "CalZ", "CalW")
ONE_PARAMETER = ("F", "G", "B0det", "CalB0")


@dataclass(frozen=True)
class GridSpec:
    s_points: tuple[float, ...]
    t_points: tuple[float, ...]

    def __post_init__(self):
        for name in ("s_points", "t_points"):
            pts = np.asarray(getattr(self, name), dtype=float)
            if pts.ndim != 1 or pts.size == 0:
                raise ValueError(f"{name} must be a non-empty 1-d sequence")
            if np.any(pts < 0) or np.any(pts > 1):
                raise ValueError(f"{name} must lie in [0, 1]")
            if np.any(np.diff(pts) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, tuple(float(p) for p in pts))

    @property
    def s(self) -> np.ndarray:
        return np.asarray(self.s_points)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.t_points)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.s_points), len(self.t_points)

    @classmethod
    def square(cls, points: Sequence[float]) -> GridSpec:
        return cls(tuple(points), tuple(points))

    @classmethod
    def default(cls) -> GridSpec:
        """Interior 5x5 grid plus the boundary lines s, t in {0, 1}."""
        return cls.square((0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0))

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        """``"0,0.5,1"`` (same points on both axes) or ``"0,0.5,1;0,0.25,1"``."""
        parts = [p for p in text.split(";") if p.strip()]
        axes = [tuple(float(x) for x in p.split(",") if x.strip()) for p in parts]
        if len(axes) == 1:
            return cls(axes[0], axes[0])
        if len(axes) == 2:
            return cls(axes[0], axes[1])
        raise ValueError(f"cannot parse grid {text!r}")


@dataclass(frozen=True)
class TruncationDraw:
    """Row selectors ``r`` and column selectors ``c``, uniform on [0, 1]."""

    r: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        r, c = np.asarray(self.r, float), np.asarray(self.c, float)
        if r.shape != c.shape:
            raise ValueError(f"row and column selectors differ in shape: {r.shape} vs {c.shape}")
        if np.any(r < 0) or np.any(r > 1) or np.any(c < 0) or np.any(c > 1):
            raise ValueError("selectors must lie in [0, 1]")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.r.shape[-1]


def sample_truncation(n: int, rng: RngLike = None, size: int | None = None) -> TruncationDraw:
    g = as_generator(rng)
    shape = (n,) if size is None else (int(size), n)
    return TruncationDraw(g.random(shape), g.random(shape))


@dataclass
class ProcessSample:
    kind: str
    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TWO_PARAMETER + ONE_PARAMETER:
            raise ValueError(f"unknown process kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)

    @property
    def axis(self) -> str | None:
        if self.kind in TWO_PARAMETER:
            return None
        return "t" if self.kind == "F" else "s"

    def rows(self):
        if self.axis is None:
            for a, s in enumerate(self.grid.s_points):
                for b, t in enumerate(self.grid.t_points):
                    yield s, t, float(self.values[a, b])
        elif self.axis == "s":
            for a, s in enumerate(self.grid.s_points):
                yield s, None, float(self.values[a])
        else:
            for b, t in enumerate(self.grid.t_points):
                yield None, t, float(self.values[b])

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["kind", "s", "t", "value"])
        for s, t, v in self.rows():
            wr.writerow([self.kind, fmt(s), fmt(t), fmt(v)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        doc = {
            "kind": self.kind,
            "s_points": list(self.grid.s_points),
            "t_points": list(self.grid.t_points),
            "values": self.values.tolist(),
            "meta": self.meta,
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> ProcessSample:
        doc = json.loads(text)
        grid = GridSpec(tuple(doc["s_points"]), tuple(doc["t_points"]))
        return cls(doc["kind"], grid, np.asarray(doc["values"]), doc.get("meta", {}))


def fmt(x) -> str:
    """Round-trippable decimal (17 significant digits); empty for ``None``."""
    if x is None:
        return ""
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# array-level evaluation
# --------------------------------------------------------------------------


def block_sizes(n: int, points) -> np.ndarray:
    return np.floor(n * np.asarray(points, float) + _FLOOR_EPS).astype(int)


def indicators(u: np.ndarray, points) -> np.ndarray:
    """``1{u_i <= p}`` as floats, shape (..., len(points), n)."""
    p = np.asarray(points, float)
    return (u[..., None, :] <= p[:, None]).astype(float)


def centered_indicators(u: np.ndarray, points) -> np.ndarray:
    p = np.asarray(points, float)
    return indicators(u, p) - p[:, None]


def _bilinear(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ w @ b^T`` via the factored path: first ``w b^T`` per t-point."""
    wb = w @ np.swapaxes(b, -1, -2)  # (..., n, T)
    return a @ wb  # (..., S, T)


def T_values(w: np.ndarray, s_points, t_points) -> np.ndarray:
    n = w.shape[-1]
    pad = [(0, 0)] * (w.ndim - 2) + [(1, 0), (1, 0)]
    cum = np.pad(np.cumsum(np.cumsum(w, axis=-2), axis=-1), pad)
    ks, kt = block_sizes(n, s_points), block_sizes(n, t_points)
    return cum[..., ks[:, None], kt[None, :]]


def calT_values(w, r, c, s_points, t_points) -> np.ndarray:
    return _bilinear(w, indicators(r, s_points), indicators(c, t_points))


def calZ_values(w, r, c, s_points, t_points) -> np.ndarray:
    return _bilinear(w, centered_indicators(r, s_points), centered_indicators(c, t_points))


def empirical_values(u: np.ndarray, points) -> np.ndarray:
    """``n^{-1/2} sum_i (1{u_i <= p} - p)``, shape (..., len(points))."""
    n = u.shape[-1]
    return centered_indicators(u, points).sum(axis=-1) / np.sqrt(n)


def calW_values(r, c, s_points, t_points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(W, F, G) with ``W(s, t) = s F(t) + t G(s)``."""
    s, t = np.asarray(s_points, float), np.asarray(t_points, float)
    f = empirical_values(c, t)
    g = empirical_values(r, s)
    w = s[:, None] * f[..., None, :] + t[None, :] * g[..., :, None]
    return w, f, g


def xi_parts(w, r, c, s_points, t_points) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise non-decreasing ``(Xi1, Xi2)`` with ``calZ = Xi1 - Xi2``."""
    n = w.shape[-1]
    s, t = np.asarray(s_points, float), np.asarray(t_points, float)
    st = s[:, None] * t[None, :]
    xi1 = calT_values(w, r, c, s, t) + n * st
    rows = indicators(r, s).sum(axis=-1)  # (..., S)
    cols = indicators(c, t).sum(axis=-1)  # (..., T)
    xi2 = s[:, None] * cols[..., None, :] + t[None, :] * rows[..., :, None]
    return xi1, xi2


def anova_residual_values(w, r, c, s_points, t_points) -> np.ndarray:
    """max |(calT - n s t) - calZ - sqrt(n) calW| over the grid, per matrix."""
    n = w.shape[-1]
    s, t = np.asarray(s_points, float), np.asarray(t_points, float)
    centered = calT_values(w, r, c, s, t) - n * s[:, None] * t[None, :]
    z = calZ_values(w, r, c, s, t)
    wv, _, _ = calW_values(r, c, s, t)
    return np.abs(centered - z - np.sqrt(n) * wv).max(axis=(-1, -2))


def B0det_values(col: np.ndarray, s_points) -> np.ndarray:
    n = col.shape[-1]
    pad = [(0, 0)] * (col.ndim - 1) + [(1, 0)]
    cum = np.pad(np.cumsum(col - 1.0 / n, axis=-1), pad)
    return cum[..., block_sizes(n, s_points)]


def calB0_values(col: np.ndarray, r: np.ndarray, s_points) -> np.ndarray:
    return (centered_indicators(r, s_points) * col[..., None, :]).sum(axis=-1)


# --------------------------------------------------------------------------
# ProcessSample wrappers
# --------------------------------------------------------------------------


def _weights(w) -> np.ndarray:
    arr = w.w if isinstance(w, WeightMatrix) else np.asarray(w, float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square weight matrix, got shape {arr.shape}")
    return arr


def _check_draw(w: np.ndarray, d: TruncationDraw) -> None:
    if d.r.shape != (w.shape[0],):
        raise ValueError(f"truncation draw of length {d.r.shape} does not match order {w.shape[0]}")


def eval_T(w, grid: GridSpec) -> ProcessSample:
    arr = _weights(w)
    return ProcessSample("T", grid, T_values(arr, grid.s, grid.t))


def eval_calT(w, d: TruncationDraw, grid: GridSpec) -> ProcessSample:
    arr = _weights(w)
    _check_draw(arr, d)
    return ProcessSample("CalT", grid, calT_values(arr, d.r, d.c, grid.s, grid.t))


def eval_calZ(w, d: TruncationDraw, grid: GridSpec) -> ProcessSample:
    arr = _weights(w)
    _check_draw(arr, d)
    return ProcessSample("CalZ", grid, calZ_values(arr, d.r, d.c, grid.s, grid.t))


def eval_calW_F_G(d: TruncationDraw, grid: GridSpec):
    wv, f, g = calW_values(d.r, d.c, grid.s, grid.t)
    return (
        ProcessSample("CalW", grid, wv),
        ProcessSample("F", grid, f),
        ProcessSample("G", grid, g),
    )


def check_anova_identity(w, d: TruncationDraw, grid: GridSpec) -> float:
    arr = _weights(w)
    _check_draw(arr, d)
    return float(anova_residual_values(arr, d.r, d.c, grid.s, grid.t))


def eval_B0det(col, grid: GridSpec) -> ProcessSample:
    col = np.asarray(col, float)
    return ProcessSample("B0det", grid, B0det_values(col, grid.s))


def eval_calB0(col, r, grid: GridSpec) -> ProcessSample:
    col, r = np.asarray(col, float), np.asarray(r, float)
    if col.shape != r.shape:
        raise ValueError("column and row selectors differ in length")
    return ProcessSample("CalB0", grid, calB0_values(col, r, grid.s))
