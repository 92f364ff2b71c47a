"""Exact cardinality and operation-count quasi-polynomials in N.

Counts are obtained by exact enumeration at a ladder of probe sizes and
interpolation with rational arithmetic, then verified against held-out
sizes (adjacent and far, covering every residue class).  With a single
size parameter this is simple and exactly checkable.

Point counts of parameterized sets are only eventually quasi-polynomial:
below a knee governed by the constraint constants the count follows
different piecewise regimes.  Probes start past the largest constant and
the far held-out checks sit beyond twice their sum, so a fit either
matches the asymptotic count or raises FIT_MISMATCH; values inside the
pre-asymptotic gap are not part of the contract.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import ir
from . import polyhedron as ph
from .errors import FitMismatch, InsufficientSamples

DEFAULT_PROBE_START = 8


@dataclass(frozen=True)
class QuasiPolynomial:
    """Per-residue polynomial coefficients (constant first), exact rationals.

    Evaluation at n uses the residue class n mod period.  A plain polynomial
    is a quasi-polynomial whose residue rows coincide.
    """

    period: int
    coeffs: tuple[tuple[Fraction, ...], ...]  # one row per residue

    @staticmethod
    def from_poly(cs: Sequence) -> "QuasiPolynomial":
        row = tuple(Fraction(c) for c in cs)
        return QuasiPolynomial(1, (row,)).trimmed()

    def trimmed(self) -> "QuasiPolynomial":
        rows = []
        for row in self.coeffs:
            r = list(row)
            while r and r[-1] == 0:
                r.pop()
            rows.append(tuple(r))
        width = max((len(r) for r in rows), default=0)
        rows = [r + (Fraction(0),) * (width - len(r)) for r in rows]
        if len(set(rows)) == 1 and self.period > 1:
            return QuasiPolynomial(1, (rows[0],))
        return QuasiPolynomial(self.period, tuple(rows))

    def eval(self, n: int) -> Fraction:
        row = self.coeffs[n % self.period]
        acc = Fraction(0)
        p = Fraction(1)
        for c in row:
            acc += c * p
            p *= n
        return acc

    @property
    def degree(self) -> int:
        deg = -1
        for row in self.coeffs:
            for i, c in enumerate(row):
                if c != 0:
                    deg = max(deg, i)
        return deg

    def leading(self) -> Fraction:
        """Leading coefficient; residue rows must agree at the top degree."""
        d = self.degree
        if d < 0:
            return Fraction(0)
        vals = {row[d] if d < len(row) else Fraction(0) for row in self.coeffs}
        if len(vals) != 1:
            raise FitMismatch("leading coefficient differs across residues")
        return vals.pop()

    def add(self, other: "QuasiPolynomial") -> "QuasiPolynomial":
        period = self.period * other.period // math.gcd(self.period, other.period)
        width = max(
            max((len(r) for r in self.coeffs), default=0),
            max((len(r) for r in other.coeffs), default=0),
        )
        rows = []
        for r in range(period):
            a = self.coeffs[r % self.period]
            b = other.coeffs[r % other.period]
            rows.append(
                tuple(
                    (a[i] if i < len(a) else Fraction(0))
                    + (b[i] if i < len(b) else Fraction(0))
                    for i in range(width)
                )
            )
        return QuasiPolynomial(period, tuple(rows)).trimmed()

    def __eq__(self, other):
        if not isinstance(other, QuasiPolynomial):
            return NotImplemented
        a, b = self.trimmed(), other.trimmed()
        if a.period == b.period:
            return a.coeffs == b.coeffs
        period = max(a.period, b.period)
        return all(
            a.coeffs[r % a.period] == b.coeffs[r % b.period] for r in range(period)
        )

    def __hash__(self):
        return hash(self.trimmed().coeffs)

    def render(self, param: str = "N") -> str:
        if self.period == 1:
            return _render_row(self.coeffs[0], param)
        parts = [
            f"[{param}%{self.period}=={r}] {_render_row(row, param)}"
            for r, row in enumerate(self.coeffs)
        ]
        return " ; ".join(parts)


def _render_row(row: Sequence[Fraction], param: str) -> str:
    terms = []
    for i in range(len(row) - 1, -1, -1):
        c = row[i]
        if c == 0:
            continue
        if i == 0:
            mono = ""
        elif i == 1:
            mono = param
        else:
            mono = f"{param}^{i}"
        if mono and abs(c) == 1:
            cs = "" if c > 0 else "-"
        else:
            cs = str(c)
        text = f"{cs}{'*' if mono and cs not in ('', '-') else ''}{mono}" or "0"
        terms.append(text if not terms else (f"+ {text}" if c > 0 else f"- {text.lstrip('-')}"))
    return " ".join(terms) if terms else "0"


def _interpolate(samples: list[tuple[int, int]]) -> tuple[Fraction, ...]:
    """Exact polynomial through the samples (Lagrange), constant-first."""
    coeffs = [Fraction(0)] * len(samples)
    for i, (xi, yi) in enumerate(samples):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j, (xj, _) in enumerate(samples):
            if i == j:
                continue
            denom *= xi - xj
            new = [Fraction(0)] * (len(basis) + 1)
            for k, c in enumerate(basis):
                new[k] += c * (-xj)
                new[k + 1] += c
            basis = new
        scale = Fraction(yi) / denom
        for k, c in enumerate(basis):
            coeffs[k] += scale * c
    return tuple(coeffs)


def fit_counts(
    count_at: Callable[[int], int],
    degree: int,
    period: int = 2,
    n0: int = DEFAULT_PROBE_START,
    far: int = 0,
) -> QuasiPolynomial:
    """Fit a degree-`degree`, period-`period` quasi-polynomial through exact
    counts, then verify on held-out sizes: every residue class adjacent to
    the window and again at distance `far`, which catches fits taken inside
    a pre-asymptotic regime."""
    rows = []
    top = 0
    for r in range(period):
        xs = []
        n = n0 + ((r - n0) % period)
        while len(xs) < degree + 1:
            xs.append(n)
            n += period
        top = max(top, xs[-1])
        rows.append(_interpolate([(x, count_at(x)) for x in xs]))
    qp = QuasiPolynomial(period, tuple(rows)).trimmed()
    far = max(far, 4 * period)
    holdouts = list(range(top + 1, top + period + 1)) + list(
        range(top + far + 1, top + far + period + 1)
    )
    for h in holdouts:
        if qp.eval(h) != count_at(h):
            raise FitMismatch(
                f"held-out count at N={h} is {count_at(h)}, fit gives {qp.eval(h)}"
            )
    return qp


@functools.lru_cache(maxsize=None)
def cardinality(
    p: ph.ParamPolyhedron, period: int = 2, n0: int = DEFAULT_PROBE_START
) -> QuasiPolynomial:
    """Exact point count of p as a quasi-polynomial in N."""
    if ph.is_empty(p):
        return QuasiPolynomial.from_poly([0])
    d = ph.dimension(p)
    # boundary interactions settle into the asymptotic count only once N
    # clears the constraint constants; start past the largest one and push
    # the far held-out checks beyond twice their sum
    knee = max((abs(c.form.const) for c in p.constraints), default=0)
    start = max(n0, knee + 2)
    far = 2 * sum(abs(c.form.const) for c in p.constraints)

    def count_at(n: int) -> int:
        return ph.count_points(p, n)

    try:
        return fit_counts(count_at, d, period, start, far)
    except FitMismatch:
        try:
            return fit_counts(count_at, d, period * 2, start, far)
        except FitMismatch:
            return fit_counts(count_at, d, period * 2, 2 * start + far)


@dataclass(frozen=True)
class ComplexityReport:
    per_equation: tuple[tuple[str, QuasiPolynomial], ...]
    total: QuasiPolynomial

    @property
    def degree(self) -> int:
        return self.total.degree

    def as_dict(self):
        return {
            "total": self.total.render(),
            "degree": self.degree,
            "per_equation": {n: q.render() for n, q in self.per_equation},
        }


def program_ops(p: ir.Program, n0: int = DEFAULT_PROBE_START) -> ComplexityReport:
    """Domain points computed plus reduction-body points, per equation.

    This counts work at the granularity of domain points (values computed
    and body points combined), which pins asymptotic degree and leading
    coefficient; generated-loop trip counts may differ by lower-order
    boundary terms.
    """
    per = []
    total = QuasiPolynomial.from_poly([0])
    for name, expr in p.equations:
        decl = p.decl(name)
        q = cardinality(decl.domain, n0=n0)
        for red in ir.reduces_of(expr):
            q = q.add(cardinality(red.body_domain, n0=n0))
        per.append((name, q))
        total = total.add(q)
    return ComplexityReport(tuple(per), total)


def measured_degree(counts: Sequence[tuple[int, float]]) -> float:
    """Least-squares slope of log(ops) vs log(N) over the largest half."""
    if len(counts) < 4:
        raise InsufficientSamples("need at least 4 (N, ops) samples")
    ns = [n for n, _ in counts]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InsufficientSamples("sample sizes must be strictly increasing")
    half = sorted(counts, key=lambda t: t[0])[len(counts) // 2:]
    xs = [math.log(n) for n, _ in half]
    ys = [math.log(max(c, 1)) for _, c in half]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den
