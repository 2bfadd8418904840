"""Covariance kernels of the limit processes and the one-point limit law.

Kernels (all vanish when s or t is 0):

* bivariate bridge      (s^s')(t^t') - s s' t t'
* tied-down bridge      (s^s' - s s')(t^t' - t t')
* calW infinity         s s'(t^t') + (s^s') t t' - 2 s s' t t'
* product of bridges    same covariance as the tied-down bridge
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, special

from .ensembles import EnsembleKind, RngLike, as_generator
from .processes import GridSpec, fmt

GH_ORDER = 64
# below this mixing scale the conditional integrand is too peaked for fixed nodes
_SMALL_A = 0.75


def _check_unit(*xs) -> list[np.ndarray]:
    out = []
    for x in xs:
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
            raise ValueError("kernel arguments must lie in [0, 1]")
        out.append(arr)
    return out


def bridge_cov(s, s2):
    """Brownian bridge covariance ``min(s, s') - s s'``."""
    s, s2 = _check_unit(s, s2)
    out = np.minimum(s, s2) - s * s2
    return float(out) if out.ndim == 0 else out


class KernelKind(enum.Enum):
    BIVARIATE_BRIDGE = "bivariate-bridge"
    TIED_DOWN_BRIDGE = "tied-down-bridge"
    CAL_W_INFINITY = "calw-infinity"
    PRODUCT_BRIDGE = "product-bridge"


@dataclass(frozen=True)
class CovKernel2D:
    kind: KernelKind
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.scale < 0:
            raise ValueError("kernel scale must be nonnegative")

    def __call__(self, p, q):
        (s, t), (s2, t2) = p, q
        s, t, s2, t2 = _check_unit(s, t, s2, t2)
        ms, mt = np.minimum(s, s2), np.minimum(t, t2)
        if self.kind is KernelKind.BIVARIATE_BRIDGE:
            val = ms * mt - s * s2 * t * t2
        elif self.kind is KernelKind.CAL_W_INFINITY:
            val = s * s2 * mt + ms * t * t2 - 2 * s * s2 * t * t2
        else:
            val = (ms - s * s2) * (mt - t * t2)
        val = self.scale * val
        return float(val) if np.ndim(val) == 0 else val

    def matrix(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        s, t = pts[:, 0], pts[:, 1]
        return self((s[:, None], t[:, None]), (s[None, :], t[None, :]))

    def to_csv(self, grid: GridSpec, path: str | Path | None = None) -> str:
        """Kernel over all pairs of grid points, one pair per row."""
        lines = ["s,t,s2,t2,value"]
        pts = [(s, t) for s in grid.s_points for t in grid.t_points]
        for p in pts:
            for q in pts:
                lines.append(",".join(fmt(x) for x in (*p, *q, self(p, q))))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def kernel_eval(kernel: CovKernel2D, p, q) -> float:
    return kernel(p, q)


def z_moment_constant(n: int, kind: EnsembleKind | str) -> Fraction:
    """``K_n = sum_ij E|U_ij|^4``, the scale of the finite-n calZ covariance.

    n^2 E|U_11|^4 with E|U_11|^4 = 2/(n(n+1)) (unitary) or 3/(n(n+2))
    (orthogonal); flat moduli give 1 and a permutation gives n.
    """
    kind = EnsembleKind.parse(kind)
    if n < 1:
        raise ValueError("n must be positive")
    if kind is EnsembleKind.HAAR_UNITARY:
        return Fraction(2 * n, n + 1)
    if kind is EnsembleKind.HAAR_ORTHOGONAL:
        return Fraction(3 * n, n + 2)
    if kind is EnsembleKind.DFT:
        return Fraction(1)
    return Fraction(n)


_TIED = CovKernel2D(KernelKind.TIED_DOWN_BRIDGE)
_CALW = CovKernel2D(KernelKind.CAL_W_INFINITY)


def finite_n_z_cov(n: int, kind: EnsembleKind | str, p, q) -> float:
    """Exact ``E[calZ(p) calZ(q)]`` at order n: g(s,s') g(t,t') K_n."""
    return float(z_moment_constant(n, kind)) * _TIED(p, q)


def finite_n_calT_cov(n: int, kind: EnsembleKind | str, p, q) -> float:
    """Exact covariance of ``n^{-1/2}(calT - E calT)`` at order n.

    calZ and calW are uncorrelated, so this is the calW kernel plus K_n/n
    times the tied-down kernel; for permutations it is the bivariate bridge.
    """
    return _CALW(p, q) + float(z_moment_constant(n, kind)) / n * _TIED(p, q)


def mixing_scale(kind: EnsembleKind | str) -> float:
    """Gaussian weight ``a`` in the calZ one-point limit ``a N1 + N2 N3``."""
    kind = EnsembleKind.parse(kind)
    if kind.is_haar:
        return float(np.sqrt(float(1 / kind.beta_prime)))
    if kind is EnsembleKind.DFT:
        return 0.0
    raise ValueError("the one-point calZ limit is defined for Haar and flat ensembles")


# --------------------------------------------------------------------------
# one-point law a N1 + N2 N3
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _gh_nodes(order: int = GH_ORDER) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(order)
    return x, w / np.sqrt(2 * np.pi)


def product_normal_cdf(x):
    """CDF of N2 N3: 1/2 + sign(x) (1/pi) int_0^|x| K_0."""
    x = np.asarray(x, dtype=float)
    _, ik0 = special.iti0k0(np.abs(x))
    out = 0.5 + np.sign(x) * ik0 / np.pi
    return float(out) if out.ndim == 0 else out


def _cdf_quad(x: float, a: float) -> float:
    # P(a N1 + u N3 <= x | N2 = u) = Phi(x / sqrt(a^2 + u^2)); integrand even in u
    f = lambda u: special.ndtr(x / np.sqrt(a * a + u * u)) * np.exp(-0.5 * u * u)
    val, _ = integrate.quad(f, 0.0, 12.0, points=[a, 10 * a], limit=400, epsabs=1e-12)
    return 2.0 * val / np.sqrt(2 * np.pi)


def marginal_limit_cdf(x, a: float):
    """CDF of ``a N1 + N2 N3`` with N1, N2, N3 independent standard normals.

    Conditioning on N2 = u leaves a centered normal of variance a^2 + u^2, so
    the CDF is E[Phi(x / sqrt(a^2 + N2^2))], integrated with 64-point
    Gauss-Hermite nodes.  a = 0 uses the closed form; small a uses adaptive
    quadrature.
    """
    if a < 0:
        raise ValueError("mixing scale a must be nonnegative")
    x = np.asarray(x, dtype=float)
    if a == 0:
        return product_normal_cdf(x)
    if a < _SMALL_A:
        out = np.vectorize(lambda v: _cdf_quad(v, a))(x)
        return float(out) if out.ndim == 0 else out
    u, w = _gh_nodes()
    sd = np.sqrt(a * a + u * u)
    out = special.ndtr(x[..., None] / sd) @ w
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MarginalLimitLaw:
    """Law of ``a N1 + N2 N3``."""

    a: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("mixing scale a must be nonnegative")

    @property
    def variance(self) -> float:
        return self.a**2 + 1.0

    def cdf(self, x):
        return marginal_limit_cdf(x, self.a)

    def moment(self, k: int) -> float:
        """E[X^k] by Gauss-Hermite on the conditional normal (exact for the nodes used)."""
        if k % 2:
            return 0.0
        if k == 0:
            return 1.0
        u, w = _gh_nodes()
        var = self.a**2 + u**2
        return float((special.factorial2(k - 1) * var ** (k // 2)) @ w)

    def sample(self, rng: RngLike = None, size=None) -> np.ndarray:
        g = as_generator(rng)
        n1, n2, n3 = (g.standard_normal(size) for _ in range(3))
        return self.a * n1 + n2 * n3
