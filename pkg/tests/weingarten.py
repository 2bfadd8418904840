"""Exact Haar moments by Weingarten calculus, used as an independent oracle.

Only small degrees are needed, so the Weingarten matrix is obtained by
inverting the Gram matrix exactly over the rationals.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import permutations

from sympy import QQ
from sympy.polys.matrices import DomainMatrix


def _pairings(elems: tuple[int, ...]):
    if not elems:
        yield ()
        return
    a = elems[0]
    for i in range(1, len(elems)):
        rest = elems[1:i] + elems[i + 1 :]
        for p in _pairings(rest):
            yield ((a, elems[i]),) + p


def _loops(p, q, m: int) -> int:
    adj = {i: [] for i in range(m)}
    for a, b in p + q:
        adj[a].append(b)
        adj[b].append(a)
    seen, count = set(), 0
    for i in range(m):
        if i in seen:
            continue
        count += 1
        stack = [i]
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(adj[x])
    return count


def _cycles(perm: tuple[int, ...]) -> int:
    seen, count = set(), 0
    for i in range(len(perm)):
        if i not in seen:
            count += 1
            j = i
            while j not in seen:
                seen.add(j)
                j = perm[j]
    return count


def _solve(gram, rhs):
    """Any exact solution of ``gram y = rhs``.

    Below the degree the Gram matrix is singular; the moment is then
    ``d_rows . y`` for any solution, since ``d_rows`` lies in the row space.
    """
    k = len(gram)
    aug = DomainMatrix([[QQ(v) for v in row] + [QQ(b)] for row, b in zip(gram, rhs)], (k, k + 1), QQ)
    red, pivots = aug.rref()
    red = red.to_Matrix()
    if k in pivots:
        raise ValueError("inconsistent Weingarten system")
    y = [Fraction(0)] * k
    for row, col in enumerate(pivots):
        v = red[row, k]
        y[col] = Fraction(int(v.p), int(v.q))
    return y


def _indices(pattern: dict[tuple[int, int], int]) -> tuple[list[int], list[int]]:
    rows, cols = [], []
    for (i, j), p in sorted(pattern.items()):
        rows += [i] * p
        cols += [j] * p
    return rows, cols


@lru_cache(maxsize=None)
def _orth_gram(m: int, n: int):
    pairs = list(_pairings(tuple(range(m))))
    return pairs, [[n ** _loops(p, q, m) for q in pairs] for p in pairs]


def orthogonal_moment(pattern: dict[tuple[int, int], int], n: int) -> Fraction:
    """E prod O_ij^{p_ij} over Haar O(n); needs n >= half the total degree."""
    rows, cols = _indices(pattern)
    m = len(rows)
    if m % 2:
        return Fraction(0)
    pairs, gram = _orth_gram(m, n)
    d_rows = [int(all(rows[a] == rows[b] for a, b in p)) for p in pairs]
    d_cols = [int(all(cols[a] == cols[b] for a, b in p)) for p in pairs]
    y = _solve(gram, d_cols)
    return sum((Fraction(d) * v for d, v in zip(d_rows, y)), Fraction(0))


@lru_cache(maxsize=None)
def _unit_gram(k: int, n: int):
    perms = list(permutations(range(k)))
    inv = {p: tuple(sorted(range(k), key=lambda i: p[i])) for p in perms}
    gram = [[n ** _cycles(tuple(inv[s][t[i]] for i in range(k))) for t in perms] for s in perms]
    return perms, gram


def unitary_moment(pattern: dict[tuple[int, int], int], n: int) -> Fraction:
    """E prod |U_ij|^{2 p_ij} over Haar U(n); needs n >= the total degree."""
    rows, cols = _indices(pattern)
    k = len(rows)
    perms, gram = _unit_gram(k, n)
    # U_{i_a j_a} paired with conj(U_{i_s(a) j_t(a)}): delta over sigma on rows, tau on cols
    d_rows = [int(all(rows[a] == rows[s[a]] for a in range(k))) for s in perms]
    d_cols = [int(all(cols[a] == cols[t[a]] for a in range(k))) for t in perms]
    y = _solve(gram, d_cols)
    return sum((Fraction(d) * v for d, v in zip(d_rows, y)), Fraction(0))
