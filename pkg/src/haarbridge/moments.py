"""Exact and leading-order moments of Haar matrix entries.

Everything exact is a :class:`fractions.Fraction`; floats appear only when a
caller asks for them.  A squared entry ``|U_ij|^2`` of a Haar matrix of order
n is Beta(b, (n-1) b) with b = 1 (unitary) or 1/2 (orthogonal), which gives
the single-entry moments in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .ensembles import EnsembleKind


class UnsupportedEnsemble(ValueError):
    """Raised when a moment is only defined for the Haar ensembles."""


def _haar(kind) -> EnsembleKind:
    kind = EnsembleKind.parse(kind)
    if not kind.is_haar:
        raise UnsupportedEnsemble(f"{kind.value} has no Haar entry moments")
    return kind


def _check(n: int, k: int = 0) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")


def entry_moment(n: int, k: int, beta_prime) -> Fraction:
    """E u^k for u ~ Beta(b, (n-1) b): prod_{j<k} (b + j) / (n b + j)."""
    _check(n, k)
    b = Fraction(beta_prime)
    out = Fraction(1)
    for j in range(k):
        out *= (b + j) / (n * b + j)
    return out


def m2k_unitary(n: int, k: int) -> Fraction:
    """E|U_ij|^{2k} = (n-1)! k! / (n-1+k)!."""
    _check(n, k)
    return Fraction(1, math.comb(n - 1 + k, k))


def m2k_orthogonal(n: int, k: int) -> Fraction:
    """E O_ij^{2k} = (2k-1)!! / (n (n+2) ... (n+2k-2))."""
    _check(n, k)
    out = Fraction(1)
    for j in range(k):
        out *= Fraction(2 * j + 1, n + 2 * j)
    return out


def m2k(kind, n: int, k: int) -> Fraction:
    kind = _haar(kind)
    return m2k_unitary(n, k) if kind is EnsembleKind.HAAR_UNITARY else m2k_orthogonal(n, k)


def scaled_var_v(n: int, kind) -> Fraction:
    """n^2 Var|U_11|^2 = n^2 E V_11^2, which is also E S-hat_n.

    (n-1)/(n+1) for the unitary group and 2(n-1)/(n+2) for the orthogonal one.
    """
    kind = _haar(kind)
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    return n * n * (m2k(kind, n, 2) - Fraction(1, n * n))


# --------------------------------------------------------------------------
# mixed moments on a 2x2 block
# --------------------------------------------------------------------------

# Exponents of the squared moduli (|X_11|^2, |X_12|^2, |X_21|^2, |X_22|^2).
MIXED_ITEMS: dict[str, tuple[EnsembleKind, tuple[int, int, int, int], tuple[int, int]]] = {
    "U11^4 U22^4": (EnsembleKind.HAAR_UNITARY, (2, 0, 0, 2), (4, -4)),
    "U11^2 U12^2 U21^2 U22^2": (EnsembleKind.HAAR_UNITARY, (1, 1, 1, 1), (1, -4)),
    "U11^2 U22^4": (EnsembleKind.HAAR_UNITARY, (1, 0, 0, 2), (2, -3)),
    "U11^2 U12^2 U22^2": (EnsembleKind.HAAR_UNITARY, (1, 1, 0, 1), (1, -3)),
    "O11^4 O22^4": (EnsembleKind.HAAR_ORTHOGONAL, (2, 0, 0, 2), (9, -4)),
    "O11^2 O12^2 O21^2 O22^2": (EnsembleKind.HAAR_ORTHOGONAL, (1, 1, 1, 1), (1, -4)),
    "O11^2 O22^4": (EnsembleKind.HAAR_ORTHOGONAL, (1, 0, 0, 2), (3, -3)),
    "O11^2 O12^2 O22^2": (EnsembleKind.HAAR_ORTHOGONAL, (1, 1, 0, 1), (1, -3)),
}


def mixed_moment_leading(item: str) -> tuple[int, int]:
    """Leading coefficient and power of n, e.g. ``(4, -4)`` for 4/n^4."""
    try:
        return MIXED_ITEMS[item][2]
    except KeyError:
        raise ValueError(f"unknown mixed moment {item!r}; choose from {sorted(MIXED_ITEMS)}") from None


def _i_4004(n: int) -> Fraction:
    return Fraction(9 * (n + 3) * (n + 5), (n + 6) * (n + 4) * (n + 2) * (n + 1) * n * (n - 1))


def _i_2222(n: int) -> Fraction:
    return Fraction(n * n + 4 * n + 15, (n + 6) * (n + 4) * (n + 2) * (n + 1) * n * (n - 1))


def _i_2004(n: int) -> Fraction:
    return Fraction(3 * (n + 3), n * (n - 1) * (n + 2) * (n + 4))


def _i_2202(n: int) -> Fraction:
    return Fraction(n + 1, n * (n - 1) * (n + 2) * (n + 4))


# Keys follow the block layout ((a, c), (b, d)) for E O11^a O12^b O21^c O22^d.
# The last field names the MIXED_ITEMS entry holding the leading term; the
# (2,2;0,2) integral equals that item by transposition.
ORTHOGONAL_I = {
    ((4, 0), (0, 4)): (_i_4004, 4, "O11^4 O22^4", "O11^4 O22^4"),
    ((2, 2), (2, 2)): (_i_2222, 4, "O11^2 O12^2 O21^2 O22^2", "O11^2 O12^2 O21^2 O22^2"),
    ((2, 0), (0, 4)): (_i_2004, 3, "O11^2 O22^4", "O11^2 O22^4"),
    ((2, 2), (0, 2)): (_i_2202, 3, "O11^2 O21^2 O22^2", "O11^2 O12^2 O22^2"),
}


def parse_pattern(pattern) -> tuple[tuple[int, int], tuple[int, int]]:
    if isinstance(pattern, str):
        rows = [tuple(int(x) for x in r.split(",")) for r in pattern.replace(" ", "").split(";")]
        pattern = tuple(rows)
    try:
        (a, c), (b, d) = pattern
    except (TypeError, ValueError):
        raise ValueError(f"cannot read block pattern {pattern!r}") from None
    return (int(a), int(c)), (int(b), int(d))


def orthogonal_I_exact(pattern, n: int) -> Fraction:
    """E(O11^a O12^b O21^c O22^d) for the four 2x2 patterns with closed forms.

    ``pattern`` is ``((a, c), (b, d))`` or the string ``"a,c;b,d"``.  The
    (2,2;2,2) and (2,2;0,2) forms were checked against exact orthogonal
    Weingarten sums for n = 2, 4, 8 (see tests).
    """
    key = parse_pattern(pattern)
    if key not in ORTHOGONAL_I:
        raise ValueError(f"no closed form for pattern {key}; choose from {sorted(ORTHOGONAL_I)}")
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    return ORTHOGONAL_I[key][0](int(n))


def orthogonal_I_power(pattern) -> int:
    """p such that n^p I_n tends to the leading coefficient."""
    return ORTHOGONAL_I[parse_pattern(pattern)][1]


def orthogonal_I_leading(pattern) -> tuple[int, int]:
    """Leading (coefficient, power) of the matching mixed moment."""
    return mixed_moment_leading(ORTHOGONAL_I[parse_pattern(pattern)][3])


def orthogonal_I_exponents(pattern) -> tuple[int, int, int, int]:
    """Exponents of (O11, O12, O21, O22)."""
    (a, c), (b, d) = parse_pattern(pattern)
    return a, b, c, d


def product_v_limits(kind) -> tuple[int, int]:
    """Limits of n^2 (n-1)^2 E(V11^2 V22^2) and of n^2 (n-1)^2 E(V11 V12 V21 V22)."""
    kind = _haar(kind)
    return (1, 0) if kind is EnsembleKind.HAAR_UNITARY else (4, 0)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentReport:
    name: str
    n: int
    exact_value: Fraction | None
    asymptotic_leading: tuple[int, int] | None
    source: str  # "closed-form" or "leading-order"

    @property
    def value(self) -> float:
        if self.exact_value is not None:
            return float(self.exact_value)
        coef, power = self.asymptotic_leading
        return coef * float(self.n) ** power

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "exact_value": None if self.exact_value is None else str(self.exact_value),
            "asymptotic_leading": self.asymptotic_leading,
            "source": self.source,
            "value": self.value,
        }


def moment_table(kind, n: int, max_k: int = 4) -> list[MomentReport]:
    """Everything this module knows about order-n entries of one ensemble."""
    kind = _haar(kind)
    sym = "U" if kind is EnsembleKind.HAAR_UNITARY else "O"
    out = [
        MomentReport(f"E|{sym}11|^{2 * k}", n, m2k(kind, n, k), None, "closed-form")
        for k in range(1, max_k + 1)
    ]
    if n >= 2:
        out.append(MomentReport("n^2 Var|X11|^2", n, scaled_var_v(n, kind), None, "closed-form"))
    if kind is EnsembleKind.HAAR_ORTHOGONAL and n >= 2:
        for key, (fn, _, name, _) in ORTHOGONAL_I.items():
            out.append(MomentReport(name, n, fn(n), None, "closed-form"))
    else:
        for name, (k2, _, lead) in MIXED_ITEMS.items():
            if k2 is kind:
                out.append(MomentReport(name, n, None, lead, "leading-order"))
    return out
