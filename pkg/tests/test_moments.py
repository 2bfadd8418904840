from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from haarbridge.moments import (
    MIXED_ITEMS,
    ORTHOGONAL_I,
    UnsupportedEnsemble,
    product_v_limits,
    m2k,
    m2k_orthogonal,
    m2k_unitary,
    mixed_moment_leading,
    moment_table,
    orthogonal_I_exact,
    orthogonal_I_exponents,
    orthogonal_I_leading,
    orthogonal_I_power,
    scaled_var_v,
)
from weingarten import orthogonal_moment, unitary_moment


def _pattern(a, b, c, d):
    return {k: v for k, v in {(1, 1): a, (1, 2): b, (2, 1): c, (2, 2): d}.items() if v}


@pytest.mark.parametrize("n", [1, 2, 3, 5])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_unitary_entry_moments_match_weingarten(n, k):
    assert m2k_unitary(n, k) == unitary_moment({(1, 1): k}, n)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_orthogonal_entry_moments_match_weingarten(n, k):
    assert m2k_orthogonal(n, k) == orthogonal_moment({(1, 1): 2 * k}, n)


@given(n=st.integers(1, 200))
def test_low_moments_closed_form(n):
    assert m2k_unitary(n, 1) == m2k_orthogonal(n, 1) == Fraction(1, n)
    assert m2k_unitary(n, 2) == Fraction(2, n * (n + 1))
    assert m2k_orthogonal(n, 2) == Fraction(3, n * (n + 2))


@given(n=st.integers(2, 300))
def test_scaled_variance(n):
    assert scaled_var_v(n, "unitary") == Fraction(n - 1, n + 1)
    assert scaled_var_v(n, "orthogonal") == Fraction(2 * (n - 1), n + 2)


def test_orthogonal_variance_denominator():
    # Var|O11|^2 = 2(n-1)/(n^2(n+2))
    for n in (2, 3, 7, 20):
        var = m2k_orthogonal(n, 2) - Fraction(1, n * n)
        assert var == Fraction(2 * (n - 1), n * n * (n + 2))


@pytest.mark.parametrize("key", sorted(ORTHOGONAL_I))
@pytest.mark.parametrize("n", [2, 3, 4, 8])
def test_block_integrals_match_weingarten(key, n):
    a, b, c, d = orthogonal_I_exponents(key)
    assert orthogonal_I_exact(key, n) == orthogonal_moment(_pattern(a, b, c, d), n)


def test_known_values():
    assert orthogonal_I_exact("2,2;2,2", 2) == Fraction(3, 128)
    assert orthogonal_I_exact("2,2;2,2", 4) == Fraction(47, 28800)
    assert orthogonal_I_exact("2,2;0,2", 4) == Fraction(5, 576)
    assert orthogonal_I_exact("2,0;0,4", 3) == Fraction(3, 35)


@pytest.mark.parametrize("key", sorted(ORTHOGONAL_I))
def test_block_integral_scaling(key):
    coef, power = orthogonal_I_leading(key)
    p = orthogonal_I_power(key)
    assert power == -p
    n = 10**6
    assert float(orthogonal_I_exact(key, n)) * n**p == pytest.approx(coef, rel=1e-4)


@pytest.mark.parametrize("item", sorted(MIXED_ITEMS))
def test_mixed_leading_orders_match_weingarten(item):
    kind, exps, (coef, power) = MIXED_ITEMS[item]
    pat = _pattern(*exps)
    n = 40
    if kind.value == "unitary":
        exact = unitary_moment(pat, n)
    else:
        doubled = {k: 2 * v for k, v in pat.items()}
        exact = orthogonal_moment(doubled, n)
    # relative correction is O(1/n)
    assert float(exact) * n ** (-power) == pytest.approx(coef, rel=25 / n)


def test_product_v_limits_from_exact_moments():
    # n^2(n-1)^2 E(V11^2 V22^2) with V = |X|^2 - 1/n, evaluated at large n
    n = 30
    for kind, oracle, twice in (("unitary", unitary_moment, 1), ("orthogonal", orthogonal_moment, 2)):
        def e(a, b, c, d):
            return oracle({k: twice * v for k, v in _pattern(a, b, c, d).items()}, n) if any((a, b, c, d)) else Fraction(1)

        inv = Fraction(1, n)
        diag = sum(
            Fraction(comb_a * comb_b) * (-inv) ** (4 - i - j) * e(i, 0, 0, j)
            for i, comb_a in ((0, 1), (1, 2), (2, 1))
            for j, comb_b in ((0, 1), (1, 2), (2, 1))
        )
        cross = sum(
            (-inv) ** (4 - sum(bits)) * e(*bits)
            for bits in [(a, b, c, d) for a in (0, 1) for b in (0, 1) for c in (0, 1) for d in (0, 1)]
        )
        lim_diag, lim_cross = product_v_limits(kind)
        scale = n * n * (n - 1) ** 2
        assert float(diag * scale) == pytest.approx(lim_diag, rel=0.3)
        assert abs(float(cross * scale)) < 4 / n + abs(lim_cross)


def test_moment_table_contents():
    rows = moment_table("orthogonal", 6)
    names = [r.name for r in rows]
    assert "E|O11|^4" in names and "O11^2 O21^2 O22^2" in names
    assert all(r.source == "closed-form" for r in rows)
    rows_u = moment_table("unitary", 6)
    assert any(r.source == "leading-order" for r in rows_u)
    assert rows_u[0].as_dict()["exact_value"] == "1/6"


def test_rejections():
    with pytest.raises(UnsupportedEnsemble):
        m2k("dft", 4, 2)
    with pytest.raises(ValueError):
        mixed_moment_leading("nonsense")
    with pytest.raises(ValueError):
        orthogonal_I_exact("1,1;1,1", 4)
    with pytest.raises(ValueError):
        scaled_var_v(1, "unitary")
