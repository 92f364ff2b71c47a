"""Readable, memoized, demand-driven C99 emission.

Each non-input variable becomes a memo table plus a recursive accessor
function; reductions become loops whose bounds come from exact variable
elimination on the body domain (kept symbolic in the answer indices and N).
The `main` harness reads N and the input arrays from stdin in declaration
order and prints each output array on its own line, so compiled programs
are drop-in replacements for the interpreter on the same I/O convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import ir
from . import polyhedron as ph
from .errors import UnsupportedScalar

_PRELUDE = r"""#include <stdio.h>
#include <stdlib.h>

static long long rs_floordiv(long long a, long long b) {
    long long q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}
static long long rs_ceildiv(long long a, long long b) { return -rs_floordiv(-a, b); }
static long long rs_max(long long a, long long b) { return a > b ? a : b; }
static long long rs_min(long long a, long long b) { return a < b ? a : b; }
static double rs_fmin(double a, double b) { return a < b ? a : b; }
static double rs_fmax(double a, double b) { return a > b ? a : b; }
static long long N;

static void rs_fail(const char *msg) {
    fprintf(stderr, "runtime error: %s\n", msg);
    exit(3);
}
"""

# float min/max identity mirrors the interpreter's finite sentinel
_BIG = "1.0e18"


@dataclass(frozen=True)
class CUnit:
    source: str
    entry_signature: str
    functions: dict


def _ctype(scalar: str) -> str:
    if scalar == "int":
        return "long long"
    if scalar == "float":
        return "double"
    raise UnsupportedScalar(f"cannot emit C for scalar kind {scalar!r}")


def _form_c(form: ph.AffineForm, names: Sequence[str]) -> str:
    terms = []
    for c, nm in zip(form.coeffs, names):
        if c == 0:
            continue
        if c == 1:
            terms.append(f"+ {nm}")
        elif c == -1:
            terms.append(f"- {nm}")
        else:
            terms.append(f"{'+' if c > 0 else '-'} {abs(c)}*{nm}")
    if form.param:
        c = form.param
        terms.append(f"+ N" if c == 1 else (f"- N" if c == -1 else f"{'+' if c > 0 else '-'} {abs(c)}*N"))
    terms.append(f"{'+' if form.const >= 0 else '-'} {abs(form.const)}")
    text = " ".join(terms)
    if text.startswith("+ "):
        text = text[2:]
    return "(" + text + ")"


class _Emitter:
    def __init__(self, program: ir.Program):
        self.p = program
        self.tmp = 0
        self.lines: list[str] = []
        self.functions: dict[str, str] = {}

    def fresh(self, base="t"):
        self.tmp += 1
        return f"{base}{self.tmp}"

    # -- bounds -------------------------------------------------------------

    def _levels(self, dom: ph.ParamPolyhedron, extra_eqs=()):
        """Elimination levels for a runtime scan over dom's index variables;
        rows stay symbolic in N (and anything passed via extra_eqs)."""
        rows = []
        for c in dom.constraints:
            row = c.form.coeffs + (c.form.param, c.form.const)
            if c.kind == ph.EQ:
                rows.append((ph.GE, row))
                rows.append((ph.GE, tuple(-x for x in row)))
            else:
                rows.append((ph.GE, row))
        for row in extra_eqs:
            rows.append((ph.GE, row))
            rows.append((ph.GE, tuple(-x for x in row)))
        d = dom.dim_index
        levels = [None] * d
        cur = ph._filter_rows(rows)
        levels[d - 1] = cur
        for k in range(d - 1, 0, -1):
            if cur is None:
                break
            cur = ph._eliminate_var(cur, k)
            levels[k - 1] = cur
        return levels

    def _bound_exprs(self, rows, k, names, sym_names):
        los, his = [], []
        for _, r in rows:
            ck = r[k]
            if ck == 0:
                continue
            # rebuild the non-k part as a C expression over names + symbols
            terms = []
            for i, nm in enumerate(list(names)[:k]):
                if r[i]:
                    terms.append(f"{'+' if r[i] > 0 else '-'} {abs(r[i])}*{nm}" if abs(r[i]) != 1 else f"{'+' if r[i] > 0 else '-'} {nm}")
            for j, nm in enumerate(sym_names):
                c = r[len(names) + j]
                if c:
                    terms.append(f"{'+' if c > 0 else '-'} {abs(c)}*{nm}" if abs(c) != 1 else f"{'+' if c > 0 else '-'} {nm}")
            cst = r[-1]
            terms.append(f"{'+' if cst >= 0 else '-'} {abs(cst)}")
            rest = " ".join(terms)
            if rest.startswith("+ "):
                rest = rest[2:]
            rest = f"({rest})"
            if ck > 0:
                los.append(f"rs_ceildiv(-{rest}, {ck})" if ck != 1 else f"(-{rest})")
            else:
                his.append(f"rs_floordiv({rest}, {-ck})" if ck != -1 else f"({rest})")
        lo = los[0] if len(los) == 1 else None
        hi = his[0] if len(his) == 1 else None
        if lo is None:
            lo = "rs_max(" * (len(los) - 1) + los[0] + "".join(f", {x})" for x in los[1:]) if los else None
        if hi is None:
            hi = "rs_min(" * (len(his) - 1) + his[0] + "".join(f", {x})" for x in his[1:]) if his else None
        return lo, hi

    def _scan(self, dom: ph.ParamPolyhedron, names, sym_names, body_fn, out, indent):
        """Emit nested loops enumerating dom's points lexicographically;
        body_fn(indent) emits the per-point statements."""
        levels = self._levels(dom)
        pad = "    " * indent
        if levels[0] is None:
            out.append(pad + "/* empty domain */")
            return
        d = dom.dim_index

        def rec(k, indent):
            pad = "    " * indent
            rows = levels[k]
            lo, hi = self._bound_exprs(rows, k, names, sym_names)
            if lo is None or hi is None:
                raise UnsupportedScalar(f"unbounded loop variable {names[k]}")
            v = names[k]
            out.append(pad + f"for (long long {v} = {lo}; {v} <= {hi}; {v}++) {{")
            if k == d - 1:
                conds = []
                for c in dom.constraints:
                    e = _form_c(c.form, names)
                    conds.append(f"{e} {'==' if c.kind == ph.EQ else '>='} 0")
                out.append(pad + f"    if ({' && '.join(conds) if conds else '1'}) {{")
                body_fn(indent + 2)
                out.append(pad + "    }")
            else:
                rec(k + 1, indent + 1)
            out.append(pad + "}")

        rec(0, indent)

    # -- expressions ---------------------------------------------------------

    def expr(self, e: ir.Expression, names, scalar, out, indent) -> str:
        pad = "    " * indent
        if isinstance(e, ir.Const):
            if scalar == "float":
                return f"{float(e.value)!r}"
            return str(e.value)
        if isinstance(e, ir.VarRead):
            args = ", ".join(_form_c(r, names) for r in e.access.rows)
            return f"v_{e.name}({args})"
        if isinstance(e, ir.BinaryOp):
            a = self.expr(e.lhs, names, scalar, out, indent)
            b = self.expr(e.rhs, names, scalar, out, indent)
            if e.op in ("min", "max"):
                fn = ("rs_fmin" if e.op == "min" else "rs_fmax") if scalar == "float" else (
                    "rs_min" if e.op == "min" else "rs_max"
                )
                return f"{fn}({a}, {b})"
            if e.op == "/" and scalar != "float":
                raise UnsupportedScalar("exact division cannot be emitted for integer scalars")
            return f"({a} {e.op} {b})"
        if isinstance(e, ir.Case):
            t = self.fresh("c")
            ctype = _ctype(scalar)
            out.append(pad + f"{ctype} {t};")
            first = True
            for g, sub in e.branches:
                conds = [
                    f"{_form_c(c.form, names)} {'==' if c.kind == ph.EQ else '>='} 0"
                    for c in g.constraints
                ]
                kw = "if" if first else "else if"
                out.append(pad + f"{kw} ({' && '.join(conds) if conds else '1'}) {{")
                inner: list[str] = []
                v = self.expr(sub, names, scalar, inner, indent + 1)
                out.extend(inner)
                out.append(pad + f"    {t} = {v};")
                out.append(pad + "}")
                first = False
            out.append(pad + 'else { rs_fail("demanded point not covered by any case"); }')
            return t
        if isinstance(e, ir.ReduceNode):
            return self.reduce(e, names, scalar, out, indent)
        raise AssertionError(e)

    def reduce(self, red: ir.ReduceNode, names, scalar, out, indent) -> str:
        pad = "    " * indent
        ctype = _ctype(scalar)
        acc = self.fresh("acc")
        cnt = self.fresh("n")
        body_names = red.body_domain.index_names
        # answer pinning: proj(z) == answer coordinates
        extra = []
        dom = red.body_domain
        pin_names = []
        for r_i, row in enumerate(red.projection.rows):
            a_nm = names[r_i]
            pin_names.append(a_nm)
        # rows over body vars with the answers as symbols
        sym = list(pin_names) + ["N"]
        rows = []
        for c in dom.constraints:
            row = c.form.coeffs + (0,) * len(pin_names) + (c.form.param, c.form.const)
            if c.kind == ph.EQ:
                rows.append((ph.GE, row))
                rows.append((ph.GE, tuple(-x for x in row)))
            else:
                rows.append((ph.GE, row))
        for r_i, prow in enumerate(red.projection.rows):
            row = prow.coeffs + tuple(
                -1 if j == r_i else 0 for j in range(len(pin_names))
            ) + (prow.param, prow.const)
            rows.append((ph.GE, row))
            rows.append((ph.GE, tuple(-x for x in row)))
        d = dom.dim_index
        levels = [None] * d
        cur = ph._filter_rows(rows)
        levels[d - 1] = cur
        for k in range(d - 1, 0, -1):
            if cur is None:
                break
            cur = ph._eliminate_var(cur, k)
            levels[k - 1] = cur

        if scalar == "float":
            ident = {"+": "0.0", "*": "1.0", "min": _BIG, "max": f"-{_BIG}"}[red.op]
        else:
            ident = {"+": "0", "*": "1", "min": "0", "max": "0"}[red.op]
        out.append(pad + f"{ctype} {acc} = {ident};")
        out.append(pad + f"long long {cnt} = 0;")
        if levels[0] is None:
            pass
        else:
            # avoid capture: loop variables may shadow answer names
            loop_names = [f"z{k}_{self.tmp}" for k in range(d)]

            def leaf(ind):
                p2 = "    " * ind
                conds = []
                for c in dom.constraints:
                    conds.append(
                        f"{_form_c(c.form, loop_names)} {'==' if c.kind == ph.EQ else '>='} 0"
                    )
                for r_i, prow in enumerate(red.projection.rows):
                    conds.append(f"{_form_c(prow, loop_names)} == {pin_names[r_i]}")
                out.append(p2 + f"if ({' && '.join(conds)}) {{")
                inner: list[str] = []
                v = self.expr(red.body, loop_names, scalar, inner, ind + 1)
                out.extend(inner)
                comb = {
                    "+": f"{acc} + {v}",
                    "*": f"{acc} * {v}",
                    "min": f"{'rs_fmin' if scalar == 'float' else 'rs_min'}({acc}, {v})",
                    "max": f"{'rs_fmax' if scalar == 'float' else 'rs_max'}({acc}, {v})",
                }[red.op]
                first = {
                    "+": f"{acc} + {v}",
                    "*": f"{acc} * {v}",
                    "min": v,
                    "max": v,
                }[red.op]
                if scalar == "float" or red.op in ("+", "*"):
                    out.append(p2 + f"    {acc} = {comb};")
                else:
                    out.append(p2 + f"    {acc} = ({cnt} == 0) ? ({first}) : ({comb});")
                out.append(p2 + f"    {cnt}++;")
                out.append(p2 + "}")

            def rec(k, ind):
                p2 = "    " * ind
                rows_k = levels[k]
                lo, hi = self._bound_exprs(rows_k, k, loop_names, sym)
                if lo is None or hi is None:
                    raise UnsupportedScalar("unbounded reduction variable")
                v = loop_names[k]
                out.append(p2 + f"for (long long {v} = {lo}; {v} <= {hi}; {v}++) {{")
                if k == d - 1:
                    leaf(ind + 1)
                else:
                    rec(k + 1, ind + 1)
                out.append(p2 + "}")

            rec(0, indent)
        if scalar != "float" and red.op in ("min", "max"):
            out.append(
                pad + f'if ({cnt} == 0) rs_fail("empty {red.op}-reduction without identity");'
            )
        return acc


def _box_bounds(dom: ph.ParamPolyhedron, k: int):
    """(lo, hi) affine-in-N bound expressions for index k over dom."""
    proj = ph.project(dom, [k])
    los, his = [], []
    for c in proj.constraints:
        a = c.form.coeffs[0]
        if a == 0:
            continue
        pn, cc = c.form.param, c.form.const
        if a > 0:
            los.append((a, pn, cc))
            if c.kind == ph.EQ:
                his.append((-a, -pn, -cc))
        else:
            his.append((a, pn, cc))
            if c.kind == ph.EQ:
                los.append((-a, -pn, -cc))

    def render(side, items):
        parts = []
        for a, pn, cc in items:
            num = []
            if pn:
                num.append(f"{pn}*N" if abs(pn) != 1 else ("N" if pn > 0 else "-N"))
            num.append(f"{cc:+d}" if num else str(cc))
            expr = "(" + " ".join(num) + ")"
            if side == "lo":
                parts.append(f"rs_ceildiv(-{expr}, {a})" if a != 1 else f"(-{expr})")
            else:
                parts.append(f"rs_floordiv({expr}, {-a})" if a != -1 else f"({expr})")
        if not parts:
            return None
        out = parts[0]
        fn = "rs_max" if side == "lo" else "rs_min"
        for x in parts[1:]:
            out = f"{fn}({out}, {x})"
        return out

    return render("lo", los), render("hi", his)


def emit_c(program: ir.Program) -> CUnit:
    """Emit a self-contained single-file C99 program."""
    for v in program.variables:
        _ctype(v.scalar)  # raises UnsupportedScalar for rationals
    em = _Emitter(program)
    src: list[str] = [_PRELUDE]
    funcs = {}

    # storage declarations
    for v in program.variables:
        ct = _ctype(v.scalar)
        d = v.domain.dim_index
        src.append(f"static {ct} *tab_{v.name};")
        src.append(f"static unsigned char *set_{v.name};")
        for k in range(d):
            src.append(f"static long long lo_{v.name}{k}, ext_{v.name}{k};")
        src.append("")

    # forward declarations
    for v in program.variables:
        ct = _ctype(v.scalar)
        args = ", ".join(f"long long {nm}" for nm in v.domain.index_names)
        src.append(f"static {ct} v_{v.name}({args});")
        funcs[v.name] = f"v_{v.name}"
    src.append("")

    eqs = dict(program.equations)
    for v in program.variables:
        ct = _ctype(v.scalar)
        names = v.domain.index_names
        args = ", ".join(f"long long {nm}" for nm in names)
        src.append(f"static {ct} v_{v.name}({args}) {{")
        idx_terms = []
        for k in range(v.domain.dim_index):
            stride = "".join(
                f" * ext_{v.name}{j}" for j in range(k + 1, v.domain.dim_index)
            )
            idx_terms.append(f"({names[k]} - lo_{v.name}{k}){stride}")
        idx = " + ".join(idx_terms) if idx_terms else "0"
        src.append(f"    long long idx = {idx};")
        src.append(f"    if (set_{v.name}[idx]) return tab_{v.name}[idx];")
        if v.kind == "input":
            src.append(f'    rs_fail("input {v.name} read outside provided data");')
            src.append("    return 0;")
        else:
            body: list[str] = []
            em.lines = body
            val = em.expr(eqs[v.name], names, v.scalar, body, 1)
            src.extend(body)
            src.append(f"    set_{v.name}[idx] = 1;")
            src.append(f"    tab_{v.name}[idx] = {val};")
            src.append(f"    return tab_{v.name}[idx];")
        src.append("}")
        src.append("")

    # main harness
    src.append("int main(void) {")
    src.append('    if (scanf("%lld", &N) != 1) rs_fail("expected N on stdin");')
    for v in program.variables:
        d = v.domain.dim_index
        for k in range(d):
            lo, hi = _box_bounds(v.domain, k)
            if lo is None or hi is None:
                raise UnsupportedScalar(f"variable {v.name} has an unbounded domain")
            src.append(f"    lo_{v.name}{k} = {lo};")
            src.append(f"    ext_{v.name}{k} = rs_max(0, {hi} - ({lo}) + 1);")
        size = " * ".join(f"ext_{v.name}{k}" for k in range(d)) if d else "1"
        ct = _ctype(v.scalar)
        src.append(f"    tab_{v.name} = malloc(sizeof({ct}) * rs_max(1, {size}));")
        src.append(f"    set_{v.name} = calloc(rs_max(1, {size}), 1);")
        src.append(
            f'    if (!tab_{v.name} || !set_{v.name}) rs_fail("out of memory");'
        )
    # read inputs in declaration order
    for v in program.inputs():
        names = list(v.domain.index_names)
        body: list[str] = []
        fmt = "%lf" if v.scalar == "float" else "%lld"
        ct = _ctype(v.scalar)

        def reader(ind, v=v, names=names, fmt=fmt, ct=ct):
            p2 = "    " * ind
            body.append(p2 + f"{ct} x;")
            body.append(p2 + f'if (scanf("{fmt}", &x) != 1) rs_fail("missing input value for {v.name}");')
            idx_terms = []
            for k in range(len(names)):
                stride = "".join(f" * ext_{v.name}{j}" for j in range(k + 1, len(names)))
                idx_terms.append(f"({names[k]} - lo_{v.name}{k}){stride}")
            idx = " + ".join(idx_terms) if idx_terms else "0"
            body.append(p2 + f"tab_{v.name}[{idx}] = x;")
            body.append(p2 + f"set_{v.name}[{idx}] = 1;")

        em._scan(v.domain, names, ["N"], reader, body, 1)
        src.extend(body)
    # evaluate and print outputs
    for v in program.outputs():
        names = list(v.domain.index_names)
        body: list[str] = []
        fmt = "%.17g" if v.scalar == "float" else "%lld"

        def writer(ind, v=v, names=names, fmt=fmt):
            p2 = "    " * ind
            args = ", ".join(names)
            body.append(p2 + f'printf("{fmt} ", v_{v.name}({args}));')

        em._scan(v.domain, names, ["N"], writer, body, 1)
        src.extend(body)
        src.append('    printf("\\n");')
    src.append("    return 0;")
    src.append("}")

    sig = "stdin: N, then each input array in declaration order; stdout: one line per output"
    return CUnit("\n".join(src) + "\n", sig, funcs)
