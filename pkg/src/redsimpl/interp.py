"""Demand-driven memoized interpreter: the correctness oracle and the
operation counter.

Each demanded point is computed once and memoized; reduction bodies are
enumerated through a precompiled Fourier-Motzkin scan whose bounds stay
symbolic in the answer coordinates, so per-point enumeration is a cheap
bound lookup.  Counters track body-point evaluations and operator
applications exactly.

Float min/max use a large finite identity (1e18) instead of IEEE infinity
so that generated C and the interpreter agree bit-for-bit on empty pieces;
inputs at the scales used here keep sums far below the sentinel.
"""

from __future__ import annotations

import functools
import random
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import ir
from . import polyhedron as ph
from .errors import (
    DomainHole,
    EmptyReduction,
    EvalCycle,
    SignatureMismatch,
    UnboundInput,
)

BIG = 1.0e18
BIG_CUTOFF = 1.0e17

_MISS = object()


def _identity(op: str, scalar: str):
    if op == "+":
        return 0.0 if scalar == "float" else (Fraction(0) if scalar == "rat" else 0)
    if op == "*":
        return 1.0 if scalar == "float" else (Fraction(1) if scalar == "rat" else 1)
    if op == "min":
        return BIG if scalar == "float" else None
    if op == "max":
        return -BIG if scalar == "float" else None
    raise AssertionError(op)


def _apply(op: str, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "min":
        return a if a <= b else b
    if op == "max":
        return a if a >= b else b
    raise AssertionError(op)


class _ScanPlan:
    """Enumerates {z in D : proj(z) = a} for runtime answers a at fixed N.

    Rows live over columns (body vars..., answer slots..., const); N is
    substituted at construction.  Elimination levels are prepared once.
    """

    def __init__(self, red: ir.ReduceNode, n: int):
        d = red.body_domain.dim_index
        m = red.projection.arity_out
        self.d = d
        self.m = m
        rows = []
        for c in red.body_domain.constraints:
            row = c.form.coeffs + (0,) * m + (c.form.param * n + c.form.const,)
            if c.kind == ph.EQ:
                rows.append(row)
                rows.append(tuple(-x for x in row))
            else:
                rows.append(row)
        for r_i, form in enumerate(red.projection.rows):
            row = form.coeffs + tuple(
                -1 if j == r_i else 0 for j in range(m)
            ) + (form.param * n + form.const,)
            rows.append(row)
            rows.append(tuple(-x for x in row))
        tagged = [(ph.GE, r) for r in rows]
        levels = [None] * d
        cur = ph._filter_rows(tagged)
        levels[d - 1] = cur
        for k in range(d - 1, 0, -1):
            if cur is None:
                break
            cur = ph._eliminate_var(cur, k)
            levels[k - 1] = cur
        self.levels = levels
        # exact membership rows for the leaf check
        self.checks = []
        for c in red.body_domain.constraints:
            self.checks.append(
                (c.kind, c.form.coeffs, c.form.param * n + c.form.const)
            )

    def points(self, answer: Sequence[int]):
        d, m = self.d, self.m
        if self.levels[0] is None:
            return
        out = []

        def bounds(rows, prefix, k):
            lo = hi = None
            for _, r in rows:
                ck = r[k]
                if ck == 0:
                    continue
                rest = (
                    sum(r[i] * prefix[i] for i in range(k))
                    + sum(r[d + j] * answer[j] for j in range(m))
                    + r[-1]
                )
                if ck > 0:
                    b = -(rest // ck)  # ceil(-rest/ck)
                    lo = b if lo is None else max(lo, b)
                else:
                    b = rest // (-ck)  # floor(rest/-ck)
                    hi = b if hi is None else min(hi, b)
            return lo, hi

        stack = [((), 0)]
        while stack:
            prefix, k = stack.pop()
            rows = self.levels[k]
            if rows is None:
                continue
            lo, hi = bounds(rows, prefix, k)
            if lo is None or hi is None:
                raise DomainHole(
                    "reduction body unbounded at runtime; check domain constraints"
                )
            if k == d - 1:
                for v in range(lo, hi + 1):
                    z = prefix + (v,)
                    ok = True
                    for kind, coeffs, cst in self.checks:
                        val = sum(c * x for c, x in zip(coeffs, z)) + cst
                        if (kind == ph.GE and val < 0) or (kind == ph.EQ and val != 0):
                            ok = False
                            break
                    if ok:
                        out.append(z)
            else:
                for v in range(hi, lo - 1, -1):
                    stack.append((prefix + (v,), k + 1))
        yield from out


@functools.lru_cache(maxsize=4096)
def _plan_for(red: ir.ReduceNode, n: int) -> _ScanPlan:
    return _ScanPlan(red, n)


@dataclass
class VerifyReport:
    max_abs_error: float
    max_rel_error: float
    points_compared: int
    passed: bool
    seed: int
    detail: str = ""

    def as_dict(self):
        return {
            "max_abs_error": self.max_abs_error,
            "max_rel_error": self.max_rel_error,
            "points_compared": self.points_compared,
            "pass": self.passed,
            "seed": self.seed,
            "detail": self.detail,
        }


class EvalSession:
    """One program at one size N with one set of input bindings."""

    def __init__(self, program: ir.Program, n: int, inputs: dict):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.program = program
        self.n = n
        self.inputs = inputs
        self.memo: dict[str, dict[tuple, object]] = {
            v.name: {} for v in program.variables if v.kind != "input"
        }
        self.in_progress: set = set()
        self.body_apps = 0
        self.op_apps = 0
        self._fn: dict[str, Callable] = {}
        self._scalar = {v.name: v.scalar for v in program.variables}
        self._eqs = dict(program.equations)
        for v in program.inputs():
            if v.name not in inputs:
                raise UnboundInput(f"no binding for input {v.name}")
        sys.setrecursionlimit(max(sys.getrecursionlimit(), 100000))

    # -- values ------------------------------------------------------------

    def value(self, name: str, point: tuple) -> object:
        memo = self.memo.get(name)
        if memo is None:
            try:
                return self.inputs[name][point]
            except KeyError:
                raise UnboundInput(f"input {name}{list(point)} not bound")
        hit = memo.get(point, _MISS)
        if hit is not _MISS:
            return hit
        key = (name, point)
        if key in self.in_progress:
            chain = " -> ".join(f"{k}{list(pt)}" for k, pt in list(self.in_progress) + [key])
            raise EvalCycle(f"value demands itself: {chain}")
        self.in_progress.add(key)
        try:
            fn = self._fn.get(name)
            if fn is None:
                expr = self._eqs.get(name)
                if expr is None:
                    raise DomainHole(f"{name} has no defining equation")
                fn = self._compile(expr, name)
                self._fn[name] = fn
            val = fn(point)
        finally:
            self.in_progress.discard(key)
        memo[point] = val
        return val

    # -- expression compilation ----------------------------------------------

    def _compile(self, expr: ir.Expression, ctx_var: str, count_ops: bool = True):
        n = self.n
        scalar = self._scalar.get(ctx_var, "int")
        if isinstance(expr, ir.Const):
            v = expr.value
            if scalar == "float":
                v = float(v)
            elif scalar == "rat":
                v = Fraction(v)
            return lambda pt: v
        if isinstance(expr, ir.VarRead):
            rows = tuple((r.coeffs, r.param * n + r.const) for r in expr.access.rows)
            name = expr.name
            value = self.value

            def read(pt, rows=rows, name=name, value=value):
                return value(
                    name,
                    tuple(sum(c * x for c, x in zip(cs, pt)) + k for cs, k in rows),
                )

            return read
        if isinstance(expr, ir.BinaryOp):
            fa = self._compile(expr.lhs, ctx_var, count_ops)
            fb = self._compile(expr.rhs, ctx_var, count_ops)
            op = expr.op
            sess = self

            if not count_ops:
                # inside a reduction body the work is metered per body point
                if op == "+":
                    return lambda pt: fa(pt) + fb(pt)
                if op == "-":
                    return lambda pt: fa(pt) - fb(pt)
                if op == "*":
                    return lambda pt: fa(pt) * fb(pt)
                if op == "/":
                    return lambda pt: fa(pt) / fb(pt)
                if op == "min":
                    def q_min(pt):
                        a, b = fa(pt), fb(pt)
                        return a if a <= b else b
                    return q_min

                def q_max(pt):
                    a, b = fa(pt), fb(pt)
                    return a if a >= b else b
                return q_max
            if op == "+":
                def bin_add(pt):
                    sess.op_apps += 1
                    return fa(pt) + fb(pt)
                return bin_add
            if op == "-":
                def bin_sub(pt):
                    sess.op_apps += 1
                    return fa(pt) - fb(pt)
                return bin_sub
            if op == "*":
                def bin_mul(pt):
                    sess.op_apps += 1
                    return fa(pt) * fb(pt)
                return bin_mul
            if op == "/":
                def bin_div(pt):
                    sess.op_apps += 1
                    return fa(pt) / fb(pt)
                return bin_div
            if op == "min":
                def bin_min(pt):
                    sess.op_apps += 1
                    a, b = fa(pt), fb(pt)
                    return a if a <= b else b
                return bin_min

            def bin_max(pt):
                sess.op_apps += 1
                a, b = fa(pt), fb(pt)
                return a if a >= b else b
            return bin_max
        if isinstance(expr, ir.Case):
            branches = []
            for g, sub in expr.branches:
                checks = tuple(
                    (c.kind == ph.EQ, c.form.coeffs, c.form.param * n + c.form.const)
                    for c in g.constraints
                )
                branches.append((checks, self._compile(sub, ctx_var, count_ops)))
            ctx = ctx_var

            def case_fn(pt, branches=branches):
                for checks, fn in branches:
                    ok = True
                    for is_eq, cs, k in checks:
                        v = sum(c * x for c, x in zip(cs, pt)) + k
                        if (v != 0) if is_eq else (v < 0):
                            ok = False
                            break
                    if ok:
                        return fn(pt)
                raise DomainHole(f"no case branch covers {ctx}{list(pt)} at N={n}")

            return case_fn
        if isinstance(expr, ir.ReduceNode):
            plan = _plan_for(expr, n)
            body = self._compile(expr.body, ctx_var, count_ops=False)
            op = expr.op
            ident = _identity(op, scalar)
            sess = self

            def reduce_fn(answer):
                acc = _MISS
                count = 0
                for z in plan.points(answer):
                    v = body(z)
                    count += 1
                    if acc is _MISS:
                        acc = v
                    else:
                        acc = _apply(op, acc, v)
                sess.body_apps += count
                if count == 0:
                    if ident is None:
                        raise EmptyReduction(
                            f"empty {op}-reduction at {list(answer)} has no identity"
                        )
                    return ident
                return acc

            return reduce_fn
        raise AssertionError(expr)


def evaluate(program: ir.Program, inputs: dict, n: int) -> dict:
    """Materialize every output variable over its domain at N = n."""
    session = EvalSession(program, n, inputs)
    out = {}
    for v in program.outputs():
        vals = {}
        for pt in ph.enumerate_points(v.domain, n):
            vals[pt] = session.value(v.name, pt)
        out[v.name] = vals
    return out


def random_inputs(program: ir.Program, n: int, seed: int) -> dict:
    """Seeded uniform inputs: integers in [-100, 100] for exact kinds,
    floats in [-1, 1] for float kind."""
    rng = random.Random(seed)
    out = {}
    for v in program.inputs():
        vals = {}
        for pt in ph.enumerate_points(v.domain, n):
            if v.scalar == "float":
                vals[pt] = rng.uniform(-1.0, 1.0)
            elif v.scalar == "rat":
                vals[pt] = Fraction(rng.randint(-100, 100))
            else:
                vals[pt] = rng.randint(-100, 100)
        out[v.name] = vals
    return out


def _close(a, b, tol: float) -> float:
    """Relative discrepancy, treating both-sentinel as equal."""
    if abs(a) >= BIG_CUTOFF and abs(b) >= BIG_CUTOFF and a * b > 0:
        return 0.0
    denom = max(abs(a), abs(b), 1.0)
    return abs(a - b) / denom


def verify_equivalence(
    p1: ir.Program,
    p2: ir.Program,
    n_list: Sequence[int],
    trials: int = 3,
    seed: int = 0,
    tol: float = 1e-6,
) -> VerifyReport:
    sig1 = [(v.name, v.domain.dim_index, v.scalar) for v in p1.inputs()]
    sig2 = [(v.name, v.domain.dim_index, v.scalar) for v in p2.inputs()]
    out1 = sorted(v.name for v in p1.outputs())
    out2 = sorted(v.name for v in p2.outputs())
    if sig1 != sig2 or out1 != out2:
        raise SignatureMismatch("programs do not share input/output signatures")
    max_abs = 0.0
    max_rel = 0.0
    points = 0
    exact = all(v.scalar != "float" for v in p1.outputs())
    for n in n_list:
        for t in range(trials):
            s = seed * 1_000_003 + n * 1009 + t
            inputs = random_inputs(p1, n, s)
            r1 = evaluate(p1, inputs, n)
            r2 = evaluate(p2, inputs, n)
            for name in r1:
                for pt, v1 in r1[name].items():
                    v2 = r2[name].get(pt)
                    if v2 is None:
                        return VerifyReport(
                            float("inf"), float("inf"), points, False, seed,
                            f"{name}{list(pt)} missing in candidate at N={n}",
                        )
                    points += 1
                    if exact:
                        if v1 != v2:
                            return VerifyReport(
                                float(abs(v1 - v2)), float("inf"), points, False, seed,
                                f"{name}{list(pt)} = {v2} != {v1} at N={n} trial {t}",
                            )
                    else:
                        rel = _close(float(v1), float(v2), tol)
                        max_rel = max(max_rel, rel)
                        max_abs = max(max_abs, abs(float(v1) - float(v2)))
                        if rel > tol:
                            return VerifyReport(
                                max_abs, max_rel, points, False, seed,
                                f"{name}{list(pt)}: {v2} vs {v1} at N={n} trial {t}",
                            )
    return VerifyReport(max_abs, max_rel, points, True, seed)


def op_profile(program: ir.Program, n_list: Sequence[int], seed: int = 0) -> list[tuple[int, int]]:
    """Exact work counts per problem size: reduction-body applications plus
    equation-level operator applications.  Arithmetic inside a reduction body
    is metered by the body-point count, matching the static counting
    convention (domain points plus body points)."""
    out = []
    for n in n_list:
        inputs = random_inputs(program, n, seed)
        session = EvalSession(program, n, inputs)
        for v in program.outputs():
            for pt in ph.enumerate_points(v.domain, n):
                session.value(v.name, pt)
        out.append((n, session.body_apps + session.op_apps))
    return out
