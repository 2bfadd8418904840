from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from haarbridge.ensembles import sample_weights
from haarbridge.limits import (
    CovKernel2D,
    KernelKind,
    MarginalLimitLaw,
    bridge_cov,
    finite_n_calT_cov,
    finite_n_z_cov,
    marginal_limit_cdf,
    mixing_scale,
    product_normal_cdf,
    z_moment_constant,
)
from haarbridge.processes import GridSpec, calZ_values

unit = st.floats(0, 1, allow_nan=False)
points = st.tuples(unit, unit)


@given(p=points, q=points)
def test_kernels_symmetric_and_vanish_on_axes(p, q):
    for kind in KernelKind:
        k = CovKernel2D(kind)
        assert k(p, q) == pytest.approx(k(q, p), abs=1e-15)
        assert k((0.0, p[1]), q) == pytest.approx(0.0, abs=1e-15)
        assert k((p[0], 0.0), q) == pytest.approx(0.0, abs=1e-15)


@given(p=points, q=points)
def test_tied_down_factorizes(p, q):
    k = CovKernel2D(KernelKind.TIED_DOWN_BRIDGE)
    assert k(p, q) == pytest.approx(bridge_cov(p[0], q[0]) * bridge_cov(p[1], q[1]), abs=1e-15)
    assert CovKernel2D(KernelKind.PRODUCT_BRIDGE)(p, q) == pytest.approx(k(p, q), abs=1e-15)


@given(p=points, q=points)
def test_bivariate_bridge_splits_into_tied_down_plus_calw(p, q):
    full = CovKernel2D(KernelKind.BIVARIATE_BRIDGE)(p, q)
    parts = CovKernel2D(KernelKind.TIED_DOWN_BRIDGE)(p, q) + CovKernel2D(KernelKind.CAL_W_INFINITY)(p, q)
    assert full == pytest.approx(parts, abs=1e-14)


@pytest.mark.parametrize("kind", list(KernelKind))
def test_kernel_matrices_are_psd(kind):
    g = np.linspace(0.05, 1, 8)
    pts = [(s, t) for s in g for t in g]
    eig = np.linalg.eigvalsh(CovKernel2D(kind).matrix(pts))
    assert eig.min() > -1e-12


def test_kernel_rejects_out_of_range():
    with pytest.raises(ValueError):
        CovKernel2D(KernelKind.TIED_DOWN_BRIDGE)((1.2, 0.5), (0.5, 0.5))
    with pytest.raises(ValueError):
        CovKernel2D(KernelKind.TIED_DOWN_BRIDGE, scale=-1.0)


def test_kernel_csv():
    text = CovKernel2D("tied-down-bridge").to_csv(GridSpec.square((0.5, 1.0)))
    lines = text.splitlines()
    assert lines[0] == "s,t,s2,t2,value" and len(lines) == 17
    assert float(lines[1].split(",")[-1]) == pytest.approx(0.0625)


@pytest.mark.parametrize("kind", ["unitary", "orthogonal", "dft", "permutation"])
def test_z_moment_constant_is_sum_of_fourth_moduli(kind):
    n, m = 6, 4000
    w = sample_weights(kind, n, 5, size=m)
    est = (w**2).sum(axis=(1, 2))
    exact = float(z_moment_constant(n, kind))
    se = est.std() / np.sqrt(m) + 1e-15
    assert abs(est.mean() - exact) < 5 * se


def test_finite_n_z_cov_exact_by_enumeration_over_selectors():
    # For a fixed weight matrix, E over the selectors is a finite sum of
    # products of bridge covariances; averaging over permutations gives n.
    n = 4
    p, q = (0.3, 0.6), (0.5, 0.2)
    g = bridge_cov(p[0], q[0]) * bridge_cov(p[1], q[1])
    w = np.eye(n)
    direct = (w**2).sum() * g  # cross terms vanish after centering
    assert finite_n_z_cov(n, "permutation", p, q) == pytest.approx(direct)
    assert finite_n_calT_cov(n, "permutation", p, q) == pytest.approx(
        CovKernel2D(KernelKind.BIVARIATE_BRIDGE)(p, q)
    )


def test_z_cov_monte_carlo_dft():
    n, m = 16, 20000
    rng = np.random.default_rng(3)
    w = np.full((n, n), 1 / n)
    r, c = rng.random((m, n)), rng.random((m, n))
    z = calZ_values(w, r, c, [0.3], [0.7])[:, 0, 0]
    exact = finite_n_z_cov(n, "dft", (0.3, 0.7), (0.3, 0.7))
    se = (z**2).std() / np.sqrt(m)
    assert abs((z**2).mean() - exact) < 5 * se


def test_mixing_scale():
    assert mixing_scale("unitary") == 1.0
    assert mixing_scale("orthogonal") == pytest.approx(np.sqrt(2))
    assert mixing_scale("dft") == 0.0
    with pytest.raises(ValueError):
        mixing_scale("permutation")


def _cdf_by_2d_quadrature(x, a):
    # independent oracle: integrate the joint density of (N1, N2) over N3's CDF
    def inner(n2):
        return integrate.quad(
            lambda n1: stats.norm.pdf(n1) * special.ndtr((x - a * n1) / n2) if n2 > 0 else 0.0,
            -9, 9, epsabs=1e-11,
        )[0]

    # P(a N1 + N2 N3 <= x) with N2 > 0 by symmetry of N3
    val = integrate.quad(lambda u: 2 * stats.norm.pdf(u) * inner(u), 0, 9, epsabs=1e-10, limit=200)[0]
    return val


@pytest.mark.parametrize("a", [0.3, 1.0, np.sqrt(2)])
@pytest.mark.parametrize("x", [-2.0, -0.4, 0.1, 1.5])
def test_marginal_cdf_against_double_integral(a, x):
    assert marginal_limit_cdf(x, a) == pytest.approx(_cdf_by_2d_quadrature(x, a), abs=2e-7)


def test_product_normal_cdf_matches_sampling_and_symmetry():
    xs = np.array([-3.0, -1.0, -0.2, 0.0, 0.2, 1.0, 3.0])
    vals = product_normal_cdf(xs)
    assert vals[3] == 0.5
    assert np.allclose(vals + vals[::-1], 1.0)
    rng = np.random.default_rng(0)
    s = rng.standard_normal(200000) * rng.standard_normal(200000)
    assert np.allclose(vals, (s[:, None] <= xs).mean(axis=0), atol=5e-3)
    assert marginal_limit_cdf(0.7, 0.0) == product_normal_cdf(0.7)


@given(x=st.floats(-6, 6))
def test_marginal_cdf_continuous_across_quadrature_switch(x):
    lo = marginal_limit_cdf(x, 0.7499999)
    hi = marginal_limit_cdf(x, 0.75)
    assert lo == pytest.approx(hi, abs=1e-6)


def test_marginal_cdf_monotone_and_limits():
    xs = np.linspace(-8, 8, 201)
    for a in (0.0, 0.2, 1.0, 2.0):
        f = marginal_limit_cdf(xs, a)
        assert np.all(np.diff(f) >= -1e-12)
        assert f[0] < 1e-3 and f[-1] > 1 - 1e-3


def test_law_moments():
    law = MarginalLimitLaw(np.sqrt(2))
    assert law.variance == pytest.approx(3.0)
    assert law.moment(2) == pytest.approx(3.0)
    # E(a N1 + N2 N3)^4 = 3a^4 + 6a^2 + 9
    assert law.moment(4) == pytest.approx(3 * 4 + 6 * 2 + 9)
    assert law.moment(3) == 0.0
    x = law.sample(1, 100000)
    assert stats.kstest(x, law.cdf).pvalue > 1e-3
    with pytest.raises(ValueError):
        MarginalLimitLaw(-1.0)
