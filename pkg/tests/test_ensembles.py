from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from haarbridge.ensembles import (
    EnsembleKind,
    RngStream,
    dft_matrix,
    householder_qr,
    permutation_matrix,
    sample_dirichlet,
    sample_gamma,
    sample_haar_column,
    sample_matrix,
    sample_permutation_indices,
    sample_weights,
    unitarity_residual,
    weight_matrix,
)

orders = st.integers(min_value=1, max_value=40)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.mark.parametrize("name", ["unitary", "orthogonal", "dft", "permutation"])
@given(n=orders, seed=seeds)
def test_every_ensemble_is_unitary_and_doubly_stochastic(name, n, seed):
    m = sample_matrix(name, n, seed)
    assert unitarity_residual(m) < 1e-12
    assert weight_matrix(m).is_doubly_stochastic(1e-12)


def test_parse_aliases():
    assert EnsembleKind.parse("Haar_Unitary") is EnsembleKind.HAAR_UNITARY
    assert EnsembleKind.parse("perm") is EnsembleKind.PERMUTATION
    with pytest.raises(ValueError):
        EnsembleKind.parse("gue")


def test_beta_prime():
    assert EnsembleKind.HAAR_UNITARY.beta_prime == 1
    assert EnsembleKind.HAAR_ORTHOGONAL.beta_prime == 0.5
    assert EnsembleKind.PERMUTATION.beta_prime is None


@given(seed=seeds, n=st.integers(2, 70), cols=st.integers(1, 70))
def test_householder_qr_reconstructs(seed, n, cols):
    g = np.random.default_rng(seed)
    a = g.standard_normal((n, cols)) + 1j * g.standard_normal((n, cols))
    a = a[:, : min(n, cols)]
    q, r = householder_qr(a)
    assert np.allclose(q @ r, a, atol=1e-10)
    assert np.allclose(np.triu(r), r)


def test_orthogonal_is_real_and_unitary_is_complex():
    assert np.isrealobj(sample_matrix("orthogonal", 5, 1))
    assert np.iscomplexobj(sample_matrix("unitary", 5, 1))


def test_batched_shapes():
    for name in EnsembleKind:
        assert sample_matrix(name, 6, 3, size=4).shape == (4, 6, 6)
        assert sample_weights(name, 6, 3, size=4).shape == (4, 6, 6)


def test_dft_entries_exact():
    f = dft_matrix(4)
    assert f[1, 1] == -0.5j
    assert f[2, 2] == 0.5
    w = sample_weights("dft", 7)
    assert np.all(w == 1 / 7)


def test_permutation_matrix_rows():
    perm = sample_permutation_indices(9, 5)
    m = permutation_matrix(perm)
    assert np.array_equal(m.argmax(axis=1), perm)
    assert sorted(perm) == list(range(9))


def test_rng_stream_reproducible_and_distinct():
    a = RngStream(5, 2).generator().random(4)
    b = RngStream(5, 2).generator().random(4)
    c = RngStream(5, 3).generator().random(4)
    d = RngStream(5, 2).child(0).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_haar_first_entry_modulus_is_beta():
    # |U_11|^2 ~ Beta(1, n-1) (unitary) and Beta(1/2, (n-1)/2) (orthogonal)
    n, m = 6, 4000
    u = np.abs(sample_matrix("unitary", n, 11, size=m)[:, 0, 0]) ** 2
    o = sample_matrix("orthogonal", n, 12, size=m)[:, 0, 0] ** 2
    assert stats.kstest(u, stats.beta(1, n - 1).cdf).pvalue > 1e-3
    assert stats.kstest(o, stats.beta(0.5, (n - 1) / 2).cdf).pvalue > 1e-3


def test_haar_is_invariant_under_fixed_rotation():
    # the (1,1) entry of V U has the same law as U_11
    n, m = 5, 4000
    v = sample_matrix("unitary", n, 99)
    u = sample_matrix("unitary", n, 13, size=m)
    x = np.abs((v @ u)[:, 0, 0]) ** 2
    assert stats.kstest(x, stats.beta(1, n - 1).cdf).pvalue > 1e-3


@pytest.mark.parametrize("kind", ["unitary", "orthogonal"])
def test_column_sampler_matches_full_matrix_law(kind):
    n, m = 7, 3000
    col = np.abs(sample_haar_column(n, kind, 3, size=m)) ** 2
    full = np.abs(sample_matrix(kind, n, 4, size=m)[:, :, 0]) ** 2
    assert np.allclose(col.sum(axis=1), 1)
    assert stats.ks_2samp(col[:, 2], full[:, 2]).pvalue > 1e-3


def test_column_sampler_rejects_structured():
    with pytest.raises(ValueError):
        sample_haar_column(4, "dft", 0)


@pytest.mark.parametrize("shape", [1.0, 0.5, 2.5])
def test_gamma_sampler(shape):
    x = sample_gamma(shape, 8, 5000)
    assert stats.kstest(x, stats.gamma(shape).cdf).pvalue > 1e-3


def test_dirichlet_sums_to_one_and_marginal_is_beta():
    d = sample_dirichlet(5, 0.5, 2, size=4000)
    assert np.allclose(d.sum(axis=1), 1)
    assert stats.kstest(d[:, 0], stats.beta(0.5, 2.0).cdf).pvalue > 1e-3


def test_invalid_orders():
    with pytest.raises(ValueError):
        sample_matrix("unitary", 0, 1)
    with pytest.raises(ValueError):
        sample_gamma(0.0, 1)
