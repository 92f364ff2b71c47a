"""Exact rational and integer linear algebra.

Everything here is exact: matrices hold `fractions.Fraction` entries and
vectors hold python ints.  No floating point is used anywhere, which the
saturation tests and sign decisions elsewhere in the package depend on.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Optional, Sequence

IntVector = tuple[int, ...]


def ivec_gcd(v: Iterable[int]) -> int:
    g = 0
    for x in v:
        g = gcd(g, abs(x))
    return g


def ivec_primitive(v: Sequence[int]) -> IntVector:
    """Scale to lowest integer terms with the first nonzero component positive."""
    g = ivec_gcd(v)
    if g == 0:
        return tuple(v)
    w = [x // g for x in v]
    for x in w:
        if x != 0:
            if x < 0:
                w = [-y for y in w]
            break
    return tuple(w)


def ivec_dot(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(x * y for x, y in zip(a, b))


@dataclass(frozen=True)
class RatMatrix:
    """Immutable matrix of exact rationals, stored row-major in lowest terms."""

    entries: tuple[tuple[Fraction, ...], ...]

    @staticmethod
    def from_rows(rows: Sequence[Sequence]) -> "RatMatrix":
        return RatMatrix(tuple(tuple(Fraction(x) for x in row) for row in rows))

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.entries[i]

    def mul_vec(self, v: Sequence) -> tuple[Fraction, ...]:
        return tuple(sum(r[j] * Fraction(v[j]) for j in range(self.cols)) for r in self.entries)


def _echelon(m: RatMatrix) -> tuple[list[list[Fraction]], list[int]]:
    """Row echelon form; returns (rows, pivot column per row)."""
    rows = [list(r) for r in m.entries]
    pivots: list[int] = []
    r = 0
    for c in range(m.cols):
        pr = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def rank(m: RatMatrix) -> int:
    """Row rank by exact Gaussian elimination."""
    if m.rows == 0 or m.cols == 0:
        return 0
    _, pivots = _echelon(m)
    return len(pivots)


def null_space_basis(m: RatMatrix) -> list[IntVector]:
    """Basis of the right null space, each vector in primitive integer form.

    Free variables are walked in column order, so the basis is deterministic.
    Empty list when the matrix has full column rank.
    """
    n = m.cols
    if n == 0:
        return []
    if m.rows == 0:
        return [tuple(1 if j == i else 0 for j in range(n)) for i in range(n)]
    rows, pivots = _echelon(m)
    pivot_set = set(pivots)
    free = [c for c in range(n) if c not in pivot_set]
    basis: list[IntVector] = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for ri, pc in enumerate(pivots):
            v[pc] = -rows[ri][fc]
        denom_lcm = 1
        for x in v:
            denom_lcm = denom_lcm * x.denominator // gcd(denom_lcm, x.denominator)
        basis.append(ivec_primitive([int(x * denom_lcm) for x in v]))
    return basis


def solve_rational(m: RatMatrix, b: Sequence) -> Optional[tuple[Fraction, ...]]:
    """One exact solution of m*x = b, or None when the system is inconsistent."""
    bf = [Fraction(x) for x in b]
    aug = RatMatrix(tuple(tuple(r) + (bf[i],) for i, r in enumerate(m.entries)))
    rows, pivots = _echelon(aug)
    n = m.cols
    sol = [Fraction(0)] * n
    for ri, pc in enumerate(pivots):
        if pc == n:
            return None
        sol[pc] = rows[ri][n]
    return tuple(sol)


def int_row_rank(rows: Sequence[Sequence[int]]) -> int:
    if not rows:
        return 0
    return rank(RatMatrix.from_rows(rows))


def in_row_space(rows: Sequence[Sequence[int]], v: Sequence[int]) -> bool:
    """True when v is a rational combination of the given rows."""
    base = int_row_rank(rows)
    return int_row_rank(list(rows) + [list(v)]) == base
