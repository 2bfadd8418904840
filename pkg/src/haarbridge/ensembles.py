"""Random matrix ensembles and their squared-modulus weight matrices.

Haar samples are produced from Ginibre matrices with a blocked Householder QR
followed by the usual phase correction on the diagonal of R.  Every sampler
accepts either an :class:`RngStream` or a ready ``numpy.random.Generator`` and
an optional ``size`` for batched draws, in which case the batch axis comes
first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

UNITARITY_TOL = 1e-10
STOCHASTIC_TOL = 1e-9


class EnsembleKind(enum.Enum):
    HAAR_UNITARY = "unitary"
    HAAR_ORTHOGONAL = "orthogonal"
    DFT = "dft"
    PERMUTATION = "permutation"

    @property
    def beta_prime(self) -> Fraction | None:
        """Dyson index over two; ``None`` for permutations, which carry none."""
        if self is EnsembleKind.HAAR_ORTHOGONAL:
            return Fraction(1, 2)
        if self is EnsembleKind.PERMUTATION:
            return None
        return Fraction(1)

    @property
    def is_haar(self) -> bool:
        return self in (EnsembleKind.HAAR_UNITARY, EnsembleKind.HAAR_ORTHOGONAL)

    @classmethod
    def parse(cls, name: str | EnsembleKind) -> EnsembleKind:
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {
            "unitary": cls.HAAR_UNITARY,
            "haar-unitary": cls.HAAR_UNITARY,
            "u": cls.HAAR_UNITARY,
            "orthogonal": cls.HAAR_ORTHOGONAL,
            "haar-orthogonal": cls.HAAR_ORTHOGONAL,
            "o": cls.HAAR_ORTHOGONAL,
            "dft": cls.DFT,
            "flat": cls.DFT,
            "permutation": cls.PERMUTATION,
            "perm": cls.PERMUTATION,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown ensemble {name!r}") from None


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``.

    ``salt`` namespaces streams belonging to different experiments so that
    two experiments sharing a seed never reuse draws.
    """

    seed: int
    stream_id: int = 0
    salt: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(*self.salt, self.stream_id))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> RngStream:
        return RngStream(self.seed, stream_id, (*self.salt, self.stream_id))


RngLike = RngStream | np.random.Generator | int | None


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def _check_order(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"matrix order must be a positive integer, got {n!r}")
    return int(n)


# --------------------------------------------------------------------------
# Householder QR
# --------------------------------------------------------------------------


def _reflector(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched elementary reflector ``H = I - tau v v^H`` with ``H^H x = beta e1``.

    ``x`` has shape (b, m); ``v`` is returned with ``v[:, 0] == 1``.  The sign
    of ``beta`` is opposite to the phase of ``x[0]`` to avoid cancellation.
    """
    alpha = np.linalg.norm(x, axis=1)
    x0 = x[:, 0]
    ax0 = np.abs(x0)
    nz = ax0 > 0
    phase = np.where(nz, x0 / np.where(nz, ax0, 1.0), 1.0)
    beta = -phase * alpha
    denom = x0 - beta
    ok = alpha > 0
    v = x / np.where(ok, denom, 1.0)[:, None]
    v[:, 0] = 1.0
    tau = np.where(ok, (beta - x0) / np.where(ok, beta, 1.0), 0.0)
    return v, tau, beta


def householder_qr(a: np.ndarray, block: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """QR factorisation by blocked Householder reflections (compact WY form).

    Works on a single (m, n) matrix or a stack (b, m, n), real or complex.
    Returns the full (…, m, m) unitary factor and the (…, m, n) upper
    triangular factor.  The diagonal of R is not normalised.
    """
    a = np.asarray(a)
    single = a.ndim == 2
    if single:
        a = a[None]
    if a.ndim != 3:
        raise ValueError("expected a matrix or a stack of matrices")
    dtype = np.result_type(a.dtype, np.float64)
    r = np.array(a, dtype=dtype, copy=True)
    b, m, n = r.shape
    kmax = min(m, n)
    panels = []
    for j0 in range(0, kmax, block):
        jb = min(block, kmax - j0)
        V = np.zeros((b, m - j0, jb), dtype=dtype)
        T = np.zeros((b, jb, jb), dtype=dtype)
        for i in range(jb):
            c = j0 + i
            v, tau, beta = _reflector(r[:, c:, c])
            V[:, i:, i] = v
            if i + 1 < jb:
                sub = r[:, c:, c + 1 : j0 + jb]
                w = v.conj()[:, None, :] @ sub
                sub -= (tau.conj()[:, None, None] * v[:, :, None]) * w
            r[:, c, c] = beta
            r[:, c + 1 :, c] = 0.0
            T[:, i, i] = tau
            if i:
                z = V[:, :, :i].conj().transpose(0, 2, 1) @ V[:, :, i : i + 1]
                T[:, :i, i : i + 1] = -tau[:, None, None] * (T[:, :i, :i] @ z)
        if j0 + jb < n:
            trail = r[:, j0:, j0 + jb :]
            trail -= V @ (T.conj().transpose(0, 2, 1) @ (V.conj().transpose(0, 2, 1) @ trail))
        panels.append((j0, V, T))
    q = np.broadcast_to(np.eye(m, dtype=dtype), (b, m, m)).copy()
    for j0, V, T in reversed(panels):
        qs = q[:, j0:, j0:]
        qs -= V @ (T @ (V.conj().transpose(0, 2, 1) @ qs))
    if single:
        return q[0], r[0]
    return q, r


def haar_from_ginibre(z: np.ndarray) -> np.ndarray:
    """Map Ginibre matrices to Haar-distributed ones (QR plus phase fix)."""
    q, r = householder_qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ad = np.abs(d)
    phase = np.where(ad > 0, d / np.where(ad > 0, ad, 1.0), 1.0)
    return q * phase[..., None, :]


# --------------------------------------------------------------------------
# Samplers
# --------------------------------------------------------------------------


def _shape(n: int, size: int | None) -> tuple[int, ...]:
    return (n, n) if size is None else (int(size), n, n)


def sample_haar_unitary(n: int, rng: RngLike = None, size: int | None = None) -> np.ndarray:
    n = _check_order(n)
    g = as_generator(rng)
    shape = _shape(n, size)
    z = (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2.0)
    return haar_from_ginibre(z)


def sample_haar_orthogonal(n: int, rng: RngLike = None, size: int | None = None) -> np.ndarray:
    n = _check_order(n)
    g = as_generator(rng)
    return haar_from_ginibre(g.standard_normal(_shape(n, size)))


def sample_haar_column(
    n: int, kind: EnsembleKind | str, rng: RngLike = None, size: int | None = None
) -> np.ndarray:
    """First column of a Haar matrix without sampling the rest.

    With positive-diagonal R the first column of Q is the first Ginibre column
    divided by its norm, so this is exact and costs O(n) per draw.
    """
    n = _check_order(n)
    kind = EnsembleKind.parse(kind)
    g = as_generator(rng)
    shape = (n,) if size is None else (int(size), n)
    if kind is EnsembleKind.HAAR_UNITARY:
        z = g.standard_normal(shape) + 1j * g.standard_normal(shape)
    elif kind is EnsembleKind.HAAR_ORTHOGONAL:
        z = g.standard_normal(shape)
    else:
        raise ValueError(f"column sampling needs a Haar ensemble, got {kind.value}")
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def dft_matrix(n: int) -> np.ndarray:
    n = _check_order(n)
    jk = np.outer(np.arange(n), np.arange(n)) % n
    # degree-based trig is exact at quarter turns, so F[1, 1] = -i/2 at n = 4
    deg = 360.0 * jk / n
    re = special.cosdg(deg) + 0.0
    im = 0.0 - special.sindg(deg)
    return (re + 1j * im) / np.sqrt(n)


def sample_permutation_indices(n: int, rng: RngLike = None, size: int | None = None) -> np.ndarray:
    """Uniform permutations of ``range(n)`` (Fisher-Yates via ``Generator.permuted``).

    Row ``i`` of the associated matrix has its single 1 in column ``perm[i]``.
    """
    n = _check_order(n)
    g = as_generator(rng)
    if size is None:
        return g.permutation(n)
    base = np.broadcast_to(np.arange(n), (int(size), n))
    return g.permuted(base, axis=1)


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    perm = np.asarray(perm)
    n = perm.shape[-1]
    return (perm[..., :, None] == np.arange(n)).astype(float)


def sample_permutation(n: int, rng: RngLike = None, size: int | None = None) -> np.ndarray:
    return permutation_matrix(sample_permutation_indices(n, rng, size))


def sample_matrix(kind: EnsembleKind | str, n: int, rng: RngLike = None, size: int | None = None):
    kind = EnsembleKind.parse(kind)
    if kind is EnsembleKind.HAAR_UNITARY:
        return sample_haar_unitary(n, rng, size)
    if kind is EnsembleKind.HAAR_ORTHOGONAL:
        return sample_haar_orthogonal(n, rng, size)
    if kind is EnsembleKind.PERMUTATION:
        return sample_permutation(n, rng, size)
    f = dft_matrix(n)
    return f if size is None else np.broadcast_to(f, (int(size), n, n))


def unitarity_residual(m: np.ndarray) -> np.ndarray:
    """max |M M* - I| per matrix."""
    m = np.asarray(m)
    n = m.shape[-1]
    g = m @ np.conj(np.swapaxes(m, -1, -2))
    return np.abs(g - np.eye(n)).max(axis=(-1, -2))


# --------------------------------------------------------------------------
# Weight matrices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightMatrix:
    """Squared moduli ``w[i, j] = |m[i, j]|**2`` of a unitary matrix."""

    w: np.ndarray

    @property
    def n(self) -> int:
        return self.w.shape[-1]

    @property
    def centered(self) -> np.ndarray:
        return self.w - 1.0 / self.n

    def stochastic_residual(self) -> float:
        rows = np.abs(self.w.sum(axis=-1) - 1.0).max()
        cols = np.abs(self.w.sum(axis=-2) - 1.0).max()
        return float(max(rows, cols))

    def is_doubly_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        return bool(np.all(self.w >= 0)) and self.stochastic_residual() <= tol


def weight_matrix(m: np.ndarray) -> WeightMatrix:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"weight matrix needs a square input, got shape {m.shape}")
    return WeightMatrix(np.abs(m) ** 2)


def sample_weights(kind: EnsembleKind | str, n: int, rng: RngLike = None, size: int | None = None):
    """Batched weight arrays ``|U_ij|^2`` for any ensemble (shape (size, n, n))."""
    kind = EnsembleKind.parse(kind)
    if kind is EnsembleKind.DFT:
        w = np.full((n, n), 1.0 / _check_order(n))
        return w if size is None else np.broadcast_to(w, (int(size), n, n))
    m = sample_matrix(kind, n, rng, size)
    if kind is EnsembleKind.PERMUTATION:
        return m
    return np.abs(m) ** 2


# --------------------------------------------------------------------------
# Gamma / Dirichlet
# --------------------------------------------------------------------------


def sample_gamma(beta_prime, rng: RngLike = None, size=None) -> np.ndarray:
    """Gamma(beta_prime, 1) variates; exact shortcuts for shapes 1 and 1/2."""
    bp = float(beta_prime)
    if not bp > 0:
        raise ValueError(f"gamma shape must be positive, got {beta_prime!r}")
    g = as_generator(rng)
    if bp == 1.0:
        return -np.log1p(-g.random(size))
    if bp == 0.5:
        return 0.5 * g.standard_normal(size) ** 2
    return g.standard_gamma(bp, size)


def sample_dirichlet(n: int, beta_prime, rng: RngLike = None, size: int | None = None) -> np.ndarray:
    """Symmetric Dirichlet(beta_prime, ..., beta_prime) by normalised gammas."""
    n = _check_order(n)
    shape = (n,) if size is None else (int(size), n)
    g = sample_gamma(beta_prime, rng, shape)
    return g / g.sum(axis=-1, keepdims=True)
