"""Parameterized integer polyhedra over index variables and one size parameter.

A `ParamPolyhedron` is the set of integer index points satisfying a
conjunction of affine constraints whose forms may also mention the single
size parameter (N by default).  Strict inequalities over integers are
normalized away at construction (`a < b` becomes `b - a - 1 >= 0`), so the
only constraint kinds are GE (form >= 0) and EQ (form = 0).

Emptiness is decided by exact rational Fourier-Motzkin elimination with the
parameter treated as a free variable constrained to N >= n_min; "empty"
therefore means empty for every sufficiently large N.  All arithmetic is
exact integer arithmetic.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from math import ceil, floor, gcd
from typing import Iterable, Optional, Sequence

from .errors import (
    DimensionMismatch,
    EmptyDomain,
    OutOfRange,
    RadiusExhausted,
    SyntaxErrorDiag,
    Unbounded,
)
from .linalg import IntVector, int_row_rank, ivec_gcd

DEFAULT_N_MIN = 4

GE = "ge"
EQ = "eq"


@dataclass(frozen=True)
class AffineForm:
    """coeffs . indices + param * N + const"""

    coeffs: tuple[int, ...]
    param: int = 0
    const: int = 0

    def eval(self, point: Sequence[int], n: int) -> int:
        return sum(c * x for c, x in zip(self.coeffs, point)) + self.param * n + self.const

    def eval_linear(self, vec: Sequence[int]) -> int:
        return sum(c * x for c, x in zip(self.coeffs, vec))

    def neg(self) -> "AffineForm":
        return AffineForm(tuple(-c for c in self.coeffs), -self.param, -self.const)

    def add(self, other: "AffineForm") -> "AffineForm":
        return AffineForm(
            tuple(a + b for a, b in zip(self.coeffs, other.coeffs)),
            self.param + other.param,
            self.const + other.const,
        )

    def scale(self, k: int) -> "AffineForm":
        return AffineForm(tuple(k * c for c in self.coeffs), k * self.param, k * self.const)

    def shift_const(self, d: int) -> "AffineForm":
        return AffineForm(self.coeffs, self.param, self.const + d)

    def is_zero(self) -> bool:
        return not any(self.coeffs) and self.param == 0 and self.const == 0

    def render(self, names: Sequence[str], param_name: str) -> str:
        terms = []
        for c, nm in list(zip(self.coeffs, names)) + [(self.param, param_name)]:
            if c == 0:
                continue
            if c == 1:
                terms.append(("+", nm))
            elif c == -1:
                terms.append(("-", nm))
            else:
                terms.append(("+" if c > 0 else "-", f"{abs(c)}*{nm}"))
        if self.const != 0 or not terms:
            terms.append(("+" if self.const >= 0 else "-", str(abs(self.const))))
        out = ""
        for i, (sign, text) in enumerate(terms):
            if i == 0:
                out = text if sign == "+" else "-" + text
            else:
                out += f" {sign} {text}"
        return out


@dataclass(frozen=True)
class Constraint:
    form: AffineForm
    kind: str  # GE or EQ

    def render(self, names: Sequence[str], param_name: str) -> str:
        op = ">=" if self.kind == GE else "="
        return f"{self.form.render(names, param_name)} {op} 0"


def _normalize_constraint(c: Constraint) -> Constraint:
    f = c.form
    g = gcd(ivec_gcd(f.coeffs), abs(f.param))
    if c.kind == GE:
        if g > 1:
            # integer tightening: floor the constant
            f = AffineForm(
                tuple(x // g for x in f.coeffs), f.param // g, floor(f.const / g)
            )
        return Constraint(f, GE)
    # EQ: divide only when exact, canonicalize sign
    if g > 1 and f.const % g == 0:
        f = AffineForm(tuple(x // g for x in f.coeffs), f.param // g, f.const // g)
    lead = next((x for x in f.coeffs if x != 0), f.param if f.param != 0 else f.const)
    if lead < 0:
        f = f.neg()
    return Constraint(f, EQ)


@dataclass(frozen=True)
class ParamPolyhedron:
    index_names: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    param_name: str = "N"

    def __post_init__(self):
        seen = set()
        out = []
        ges = {}
        for c in self.constraints:
            c = _normalize_constraint(c)
            key = (c.kind, c.form)
            if key in seen:
                continue
            seen.add(key)
            out.append(c)
            if c.kind == GE:
                ges[c.form] = len(out) - 1
        # fold exact opposite GE pairs (zero gap) into a single equality
        folded = []
        dropped = set()
        for i, c in enumerate(out):
            if i in dropped:
                continue
            if c.kind == GE:
                j = ges.get(c.form.neg())
                if j is not None and j != i and j not in dropped:
                    folded.append(_normalize_constraint(Constraint(c.form, EQ)))
                    dropped.add(j)
                    continue
            folded.append(c)
        object.__setattr__(self, "constraints", tuple(folded))

    @property
    def dim_index(self) -> int:
        return len(self.index_names)

    def with_constraints(self, extra: Iterable[Constraint]) -> "ParamPolyhedron":
        return ParamPolyhedron(self.index_names, self.constraints + tuple(extra), self.param_name)

    def render(self) -> str:
        body = " and ".join(c.render(self.index_names, self.param_name) for c in self.constraints)
        names = ",".join(self.index_names)
        return "{[%s] : %s}" % (names, body or "true")

    def render_sorted(self) -> str:
        cs = sorted(self.constraints, key=lambda c: (c.kind, c.form.coeffs, c.form.param, c.form.const))
        body = " and ".join(c.render(self.index_names, self.param_name) for c in cs)
        names = ",".join(self.index_names)
        return "{[%s] : %s}" % (names, body or "true")


# ---------------------------------------------------------------------------
# Fourier-Motzkin core.  Rows are integer tuples (c_0..c_{d-1}, c_param, const)
# paired with their kind.


def _rows_of(p: ParamPolyhedron) -> list[tuple[str, tuple[int, ...]]]:
    return [(c.kind, c.form.coeffs + (c.form.param, c.form.const)) for c in p.constraints]


def _row_normalize(kind: str, row: tuple[int, ...]) -> tuple[str, tuple[int, ...]]:
    g = ivec_gcd(row[:-1])
    if g > 1:
        if kind == GE:
            row = tuple(x // g for x in row[:-1]) + (floor(row[-1] / g),)
        elif row[-1] % g == 0:
            row = tuple(x // g for x in row)
    return kind, row


def _eliminate_var(rows: list[tuple[str, tuple[int, ...]]], k: int) -> Optional[list]:
    """Eliminate variable k; returns new rows or None when a contradiction
    independent of the remaining variables is found early."""
    pivot = next((r for r in rows if r[0] == EQ and r[1][k] != 0), None)
    if pivot is not None:
        out: list[tuple[str, tuple[int, ...]]] = []
        pk = pivot[1][k]
        for kind, row in rows:
            if (kind, row) == pivot:
                continue
            rk = row[k]
            if rk == 0:
                out.append((kind, row))
                continue
            # positive multiplier on the row keeps GE orientation
            lam = abs(pk)
            mu = -rk if pk > 0 else rk
            new = tuple(lam * a + mu * b for a, b in zip(row, pivot[1]))
            out.append(_row_normalize(kind, new))
        return _filter_rows(out)
    pos, neg, rest = [], [], []
    for kind, row in rows:
        if row[k] > 0:
            pos.append(row)
        elif row[k] < 0:
            neg.append(row)
        else:
            rest.append((kind, row))
    for prow in pos:
        for nrow in neg:
            lam = -nrow[k]
            mu = prow[k]
            new = tuple(lam * a + mu * b for a, b in zip(prow, nrow))
            rest.append(_row_normalize(GE, new))
    return _filter_rows(rest)


def _filter_rows(rows) -> Optional[list]:
    seen = {}
    out = []
    for kind, row in rows:
        coeffs = row[:-1]
        if not any(coeffs):
            if kind == GE and row[-1] < 0:
                return None
            if kind == EQ and row[-1] != 0:
                return None
            continue  # tautology
        key = (kind, coeffs)
        if key in seen:
            i = seen[key]
            if kind == GE and row[-1] < out[i][1][-1]:
                out[i] = (kind, row)  # tighter bound wins
            elif kind == EQ and row[-1] != out[i][1][-1]:
                return None
            continue
        seen[key] = len(out)
        out.append((kind, row))
    return out


def _feasible(rows: list, nvars: int) -> bool:
    """Rational feasibility of rows over nvars variables (constant column last)."""
    cur = _filter_rows(rows)
    if cur is None:
        return False
    for k in range(nvars):
        cur = _eliminate_var(cur, k)
        if cur is None:
            return False
    return True


def _project_rows(rows: list, drop: Sequence[int]) -> Optional[list]:
    cur = _filter_rows(rows)
    if cur is None:
        return None
    for k in sorted(drop, reverse=False):
        cur = _eliminate_var(cur, k)
        if cur is None:
            return None
    return cur


@functools.lru_cache(maxsize=None)
def is_empty(p: ParamPolyhedron, n_min: int = DEFAULT_N_MIN) -> bool:
    """True iff p has no integer point for any sufficiently large N."""
    d = p.dim_index
    for c in p.constraints:
        if c.kind == EQ:
            g = gcd(ivec_gcd(c.form.coeffs), abs(c.form.param))
            if g == 0:
                if c.form.const != 0:
                    return True
            elif c.form.const % g != 0:
                return True
    rows = _rows_of(p)
    # N >= n_min
    rows.append((GE, (0,) * d + (1, -n_min)))
    return not _feasible(rows, d + 1)


def implies(p: ParamPolyhedron, c: Constraint, n_min: int = DEFAULT_N_MIN) -> bool:
    """True when every point of p satisfies c (rationally, N >= n_min)."""
    if c.kind == GE:
        neg = Constraint(c.form.neg().shift_const(-1), GE)
        return is_empty(p.with_constraints([neg]), n_min)
    return implies(p, Constraint(c.form, GE), n_min) and implies(
        p, Constraint(c.form.neg(), GE), n_min
    )


@functools.lru_cache(maxsize=None)
def remove_redundancy(p: ParamPolyhedron, n_min: int = DEFAULT_N_MIN) -> ParamPolyhedron:
    """Drop GE constraints implied by the rest, one at a time."""
    cons = list(p.constraints)
    i = 0
    while i < len(cons):
        c = cons[i]
        if c.kind == GE:
            rest = ParamPolyhedron(p.index_names, tuple(cons[:i] + cons[i + 1:]), p.param_name)
            if implies(rest, c, n_min):
                cons.pop(i)
                continue
        i += 1
    return ParamPolyhedron(p.index_names, tuple(cons), p.param_name)


@functools.lru_cache(maxsize=None)
def form_upper_bounds(p: ParamPolyhedron, form: AffineForm) -> Optional[list[tuple]]:
    """Upper bounds derivable for `form` over p, as (num_param, num_const, den)
    meaning form <= (num_param*N + num_const)/den.  None when unbounded above."""
    d = p.dim_index
    rows = [(k, r) for k, r in _rows_of(p)]
    # t - form = 0 with t appended after the indices, before N
    trow = tuple(-c for c in form.coeffs) + (1, -form.param, -form.const)
    sys_rows = []
    for kind, r in rows:
        sys_rows.append((kind, r[:d] + (0,) + r[d:]))
    sys_rows.append((EQ, trow))
    proj = _project_rows(sys_rows, list(range(d)))
    if proj is None:
        return []  # empty set: vacuously bounded
    out = []
    for kind, r in proj:
        tc, nc, cc = r[d], r[d + 1], r[d + 2]
        if kind == EQ and tc != 0:
            # tc*t + nc*N + cc = 0  ->  t = (-nc*N - cc)/tc
            if tc > 0:
                out.append((-nc, -cc, tc))
            else:
                out.append((nc, cc, -tc))
        elif kind == GE and tc < 0:
            # tc*t + nc*N + cc >= 0  ->  t <= (nc*N + cc)/(-tc)
            out.append((nc, cc, -tc))
    return out if out else None


def constant_width_ge_indices(p: ParamPolyhedron, n_min: int = DEFAULT_N_MIN) -> list[int]:
    """Indices of GE constraints whose form is bounded above by a constant
    (parameter-free) over p: the effectively saturated inequalities."""
    out = []
    for i, c in enumerate(p.constraints):
        if c.kind != GE:
            continue
        bounds = form_upper_bounds(p, c.form)
        if bounds is None:
            continue
        if any(bp <= 0 for bp, _, _ in bounds):
            out.append(i)
    return out


@functools.lru_cache(maxsize=None)
def saturated_directions(p: ParamPolyhedron, n_min: int = DEFAULT_N_MIN) -> tuple[IntVector, ...]:
    """Index-space directions pinned to constant width: equality linear parts
    plus linear parts of effectively saturated inequality constraints."""
    dirs = [c.form.coeffs for c in p.constraints if c.kind == EQ]
    for i in constant_width_ge_indices(p, n_min):
        dirs.append(p.constraints[i].form.coeffs)
    return tuple(dirs)


def dimension(p: ParamPolyhedron, n_min: int = DEFAULT_N_MIN) -> int:
    """Index count minus the number of independent effectively saturated
    constraint directions."""
    if is_empty(p, n_min):
        raise EmptyDomain(f"dimension of empty set {p.render()}")
    dirs = saturated_directions(p, n_min)
    return p.dim_index - int_row_rank([list(v) for v in dirs])


def saturate(p: ParamPolyhedron, which: int) -> ParamPolyhedron:
    if which < 0 or which >= len(p.constraints) or p.constraints[which].kind != GE:
        raise OutOfRange(f"constraint {which} is not a saturatable inequality")
    cons = list(p.constraints)
    cons[which] = Constraint(cons[which].form, EQ)
    return ParamPolyhedron(p.index_names, tuple(cons), p.param_name)


def translate(p: ParamPolyhedron, rho: Sequence[int]) -> ParamPolyhedron:
    if len(rho) != p.dim_index:
        raise DimensionMismatch(f"translation vector has length {len(rho)}, expected {p.dim_index}")
    cons = []
    for c in p.constraints:
        shift = -c.form.eval_linear(rho)
        cons.append(Constraint(c.form.shift_const(shift), c.kind))
    return ParamPolyhedron(p.index_names, tuple(cons), p.param_name)


def substitute(
    p: ParamPolyhedron, new_names: Sequence[str], forms: Sequence[AffineForm]
) -> ParamPolyhedron:
    """Rewrite p under index substitution old_i := forms[i](new indices)."""
    assert len(forms) == p.dim_index
    cons = []
    for c in p.constraints:
        acc = AffineForm((0,) * len(new_names), c.form.param, c.form.const)
        for coef, f in zip(c.form.coeffs, forms):
            if coef:
                acc = acc.add(f.scale(coef))
        cons.append(Constraint(acc, c.kind))
    return ParamPolyhedron(tuple(new_names), tuple(cons), p.param_name)


def project(p: ParamPolyhedron, keep: Sequence[int]) -> ParamPolyhedron:
    """Rational projection onto the given index positions (order preserved)."""
    d = p.dim_index
    drop = [i for i in range(d) if i not in keep]
    perm = list(keep) + drop
    inv_rows = []
    for kind, r in _rows_of(p):
        coeffs = tuple(r[i] for i in perm)
        inv_rows.append((kind, coeffs + r[d:]))
    proj = _project_rows(inv_rows, list(range(len(keep), d)))
    names = tuple(p.index_names[i] for i in keep)
    if proj is None:
        false_c = Constraint(AffineForm((0,) * len(keep), 0, -1), GE)
        return ParamPolyhedron(names, (false_c,), p.param_name)
    cons = []
    for kind, r in proj:
        cons.append(Constraint(AffineForm(r[: len(keep)], r[d], r[d + 1]), kind))
    return ParamPolyhedron(names, tuple(cons), p.param_name)


# ---------------------------------------------------------------------------
# Point enumeration


def _subst_param(p: ParamPolyhedron, n: int) -> list[tuple[str, tuple[int, ...]]]:
    rows = []
    for c in p.constraints:
        rows.append((c.kind, c.form.coeffs + (c.form.param * n + c.form.const,)))
    return rows


@functools.lru_cache(maxsize=None)
def _scan_projections(p: ParamPolyhedron, n: int):
    """Successive projections used by the enumeration scan: level k holds rows
    over variables x_0..x_k (EQ split into GE pairs)."""
    d = p.dim_index
    base = []
    for kind, r in _subst_param(p, n):
        if kind == EQ:
            base.append((GE, r))
            base.append((GE, tuple(-x for x in r)))
        else:
            base.append((GE, r))
    levels = [None] * d
    cur = _filter_rows(base)
    levels[d - 1] = cur
    if cur is None:
        return levels
    for k in range(d - 1, 0, -1):
        cur = _eliminate_var(cur, k)
        levels[k - 1] = cur
        if cur is None:
            break
    return levels


def enumerate_points(p: ParamPolyhedron, n: int) -> list[IntVector]:
    """All integer points of p at N = n, in lexicographic order."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    d = p.dim_index
    if d == 0:
        return [()]
    levels = _scan_projections(p, n)
    if levels[0] is None:
        return []
    consts = [c.form.coeffs + (c.form.param * n + c.form.const,) for c in p.constraints]

    out: list[IntVector] = []

    def bounds(level_rows, prefix, k):
        lo, hi = None, None
        for kind, r in level_rows:
            ck = r[k]
            if ck == 0:
                continue
            rest = sum(r[i] * prefix[i] for i in range(k)) + r[-1]
            if ck > 0:
                b = ceil(-rest / ck)
                lo = b if lo is None else max(lo, b)
            else:
                b = floor(rest / -ck)
                hi = b if hi is None else min(hi, b)
        return lo, hi

    def rec(prefix, k):
        rows = levels[k]
        if rows is None:
            return
        lo, hi = bounds(rows, prefix, k)
        if lo is None or hi is None:
            raise Unbounded(f"index {p.index_names[k]} unbounded at N={n}")
        for v in range(lo, hi + 1):
            np = prefix + (v,)
            if k == d - 1:
                ok = True
                for (kind, _), row in zip(_rows_of(p), consts):
                    val = sum(c * x for c, x in zip(row[:-1], np)) + row[-1]
                    if (kind == GE and val < 0) or (kind == EQ and val != 0):
                        ok = False
                        break
                if ok:
                    out.append(np)
            else:
                rec(np, k + 1)

    rec((), 0)
    return out


def count_points(p: ParamPolyhedron, n: int) -> int:
    return len(enumerate_points(p, n))


# ---------------------------------------------------------------------------
# Smallest integer point (L1 shells, lexicographically largest tie-break)


def _shell(d: int, r: int):
    """Integer vectors of L1 norm exactly r, d components."""
    if d == 1:
        if r == 0:
            yield (0,)
        else:
            yield (r,)
            yield (-r,)
        return
    for head in range(-r, r + 1):
        for tail in _shell(d - 1, r - abs(head)):
            yield (head,) + tail


def smallest_point(p: ParamPolyhedron, radius_cap: Optional[int] = None) -> IntVector:
    """Integer point of p minimizing the L1 norm; among ties the
    lexicographically largest.  The set must be parameter-free."""
    if any(c.form.param != 0 for c in p.constraints):
        raise ValueError("smallest_point requires a parameter-free set")
    d = p.dim_index
    cap = radius_cap if radius_cap is not None else 8 * max(d, 1)

    def ok(pt):
        for c in p.constraints:
            v = c.form.eval(pt, 0)
            if (c.kind == GE and v < 0) or (c.kind == EQ and v != 0):
                return False
        return True

    for r in range(cap + 1):
        best = None
        for pt in _shell(d, r):
            if ok(pt) and (best is None or pt > best):
                best = pt
        if best is not None:
            return best
    raise RadiusExhausted(f"no point of {p.render()} within L1 radius {cap}")


# ---------------------------------------------------------------------------
# Set-builder text syntax (shared with the frontend)

_TOKEN = re.compile(r"\s*(>=|<=|==|->|[<>=:{}\[\],()*+-]|\d+|[A-Za-z_]\w*)")


def tokenize(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise SyntaxErrorDiag(f"bad character at offset {pos}: {text[pos]!r}")
            break
        out.append(m.group(1))
        pos = m.end()
    return out


class _SetParser:
    def __init__(self, tokens: list[str], names: Sequence[str], param: str):
        self.toks = tokens
        self.i = 0
        self.names = list(names)
        self.param = param

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def eat(self, expected=None):
        t = self.peek()
        if t is None or (expected is not None and t != expected):
            raise SyntaxErrorDiag(f"expected {expected!r}, found {t!r}")
        self.i += 1
        return t

    def affine(self) -> AffineForm:
        form = self.term()
        while self.peek() in ("+", "-"):
            op = self.eat()
            rhs = self.term()
            form = form.add(rhs if op == "+" else rhs.neg())
        return form

    def term(self) -> AffineForm:
        neg = False
        while self.peek() in ("+", "-"):
            if self.eat() == "-":
                neg = not neg
        t = self.eat()
        if t.isdigit():
            k = int(t)
            if self.peek() == "*":
                self.eat("*")
                name = self.eat()
                form = self.var_form(name).scale(k)
            else:
                form = AffineForm((0,) * len(self.names), 0, k)
        else:
            form = self.var_form(t)
        return form.neg() if neg else form

    def var_form(self, name: str) -> AffineForm:
        if name == self.param:
            return AffineForm((0,) * len(self.names), 1, 0)
        if name not in self.names:
            raise SyntaxErrorDiag(f"unknown index variable {name!r}")
        i = self.names.index(name)
        return AffineForm(tuple(1 if j == i else 0 for j in range(len(self.names))), 0, 0)

    def comparison_chain(self) -> list[Constraint]:
        out = []
        lhs = self.affine()
        while self.peek() in ("<=", "<", ">=", ">", "=", "=="):
            op = self.eat()
            rhs = self.affine()
            diff = rhs.add(lhs.neg())
            if op in ("<=",):
                out.append(Constraint(diff, GE))
            elif op == "<":
                out.append(Constraint(diff.shift_const(-1), GE))
            elif op == ">=":
                out.append(Constraint(diff.neg(), GE))
            elif op == ">":
                out.append(Constraint(diff.neg().shift_const(-1), GE))
            else:
                out.append(Constraint(diff, EQ))
            lhs = rhs
        if not out:
            raise SyntaxErrorDiag("expected a comparison")
        return out


def parse_set(text: str, param_name: str = "N") -> ParamPolyhedron:
    """Parse `{[i,j] : 0 <= j and j <= i and i < N}`."""
    toks = tokenize(text)
    p = _SetParser(toks, [], param_name)
    p.eat("{")
    p.eat("[")
    names = []
    while p.peek() != "]":
        names.append(p.eat())
        if p.peek() == ",":
            p.eat(",")
    p.eat("]")
    p.names = names
    cons: list[Constraint] = []
    if p.peek() == ":":
        p.eat(":")
        if p.peek() != "}":
            while True:
                if p.peek() == "true":
                    p.eat()
                else:
                    cons.extend(p.comparison_chain())
                if p.peek() == "and":
                    p.eat("and")
                else:
                    break
    p.eat("}")
    if p.peek() is not None:
        raise SyntaxErrorDiag(f"trailing tokens after set: {p.peek()!r}")
    return ParamPolyhedron(tuple(names), tuple(cons), param_name)
