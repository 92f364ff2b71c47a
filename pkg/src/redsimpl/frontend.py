"""Parser and printer for the equational `.red` language.

    param N;
    input int X : {[i] : 0 <= i and i < N};
    output int Y : {[i] : 0 <= i and i < N};
    Y[i] = reduce(+, [i,j]->[i], {[i,j] : 0 <= j and j <= i and i < N}, X[i-j]);

Expressions support +, -, *, / infix, min(a,b)/max(a,b) calls, guarded cases
`case { set -> expr; ... }`, and first-class reductions.  An `abs(e)` index
is sugar: the read is desugared at parse time into a two-branch case on the
sign of e.  Exactly one size parameter is allowed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from . import ir
from . import polyhedron as ph
from .errors import SyntaxErrorDiag

RESERVED = {
    "param", "input", "output", "local", "reduce", "case", "min", "max",
    "abs", "and", "true", "int", "rat", "float",
}

_TOKEN = re.compile(r"\s*(>=|<=|==|->|[<>=:{}\[\],;()*+/-]|\d+|[A-Za-z_]\w*)")


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    col: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: SourceSpan


def _spans(text: str):
    toks = []
    pos = 0
    line, col = 1, 1

    def advance(upto):
        nonlocal pos, line, col
        for ch in text[pos:upto]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = upto

    while pos < len(text):
        if text[pos].isspace():
            advance(pos + 1)
            continue
        if text[pos] == "#":
            nl = text.find("\n", pos)
            advance(len(text) if nl < 0 else nl)
            continue
        m = _TOKEN.match(text, pos)
        if not m or not m.group(1):
            raise SyntaxErrorDiag(f"line {line}: unexpected character {text[pos]!r}")
        advance(m.start(1))
        toks.append((m.group(1), SourceSpan(m.start(1), m.end(), line, col)))
        advance(m.end())
    return toks


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _spans(text)
        self.i = 0
        self.param: Optional[str] = None

    def error(self, msg: str):
        at = min(self.i, len(self.toks) - 1)
        if at >= 0:
            span = self.toks[at][1]
        else:
            span = SourceSpan(0, 0, 1, 1)
        raise SyntaxErrorDiag(f"line {span.line}: {msg}")

    def peek(self) -> Optional[str]:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def eat(self, expected: Optional[str] = None) -> str:
        t = self.peek()
        if t is None:
            self.error(f"unexpected end of input (expected {expected!r})")
        if expected is not None and t != expected:
            self.error(f"expected {expected!r}, found {t!r}")
        self.i += 1
        return t

    def name(self) -> str:
        t = self.peek()
        if t is None or not re.fullmatch(r"[A-Za-z_]\w*", t) or t in RESERVED:
            self.error(f"expected a name, found {t!r}")
        return self.eat()

    # ---- sets -------------------------------------------------------------

    def set_literal(self, expect_names: Optional[Sequence[str]] = None) -> ph.ParamPolyhedron:
        self.eat("{")
        self.eat("[")
        names = []
        while self.peek() != "]":
            names.append(self.name())
            if self.peek() == ",":
                self.eat(",")
        self.eat("]")
        if expect_names is not None and list(names) != list(expect_names):
            self.error(f"set indices {names} do not match context {list(expect_names)}")
        cons: list[ph.Constraint] = []
        if self.peek() == ":":
            self.eat(":")
            if self.peek() != "}":
                while True:
                    if self.peek() == "true":
                        self.eat()
                    else:
                        cons.extend(self.comparison_chain(names))
                    if self.peek() == "and":
                        self.eat("and")
                    else:
                        break
        self.eat("}")
        return ph.ParamPolyhedron(tuple(names), tuple(cons), self.param or "N")

    def comparison_chain(self, names) -> list[ph.Constraint]:
        out = []
        lhs = self.affine(names)
        ops = ("<=", "<", ">=", ">", "=", "==")
        if self.peek() not in ops:
            self.error("expected a comparison operator")
        while self.peek() in ops:
            op = self.eat()
            rhs = self.affine(names)
            diff = rhs.add(lhs.neg())
            if op == "<=":
                out.append(ph.Constraint(diff, ph.GE))
            elif op == "<":
                out.append(ph.Constraint(diff.shift_const(-1), ph.GE))
            elif op == ">=":
                out.append(ph.Constraint(diff.neg(), ph.GE))
            elif op == ">":
                out.append(ph.Constraint(diff.neg().shift_const(-1), ph.GE))
            else:
                out.append(ph.Constraint(diff, ph.EQ))
            lhs = rhs
        return out

    # ---- affine forms (no abs) ---------------------------------------------

    def affine(self, names) -> ph.AffineForm:
        form = self.affine_term(names)
        while self.peek() in ("+", "-"):
            op = self.eat()
            rhs = self.affine_term(names)
            form = form.add(rhs if op == "+" else rhs.neg())
        return form

    def affine_term(self, names) -> ph.AffineForm:
        neg = False
        while self.peek() in ("+", "-"):
            if self.eat() == "-":
                neg = not neg
        t = self.eat()
        if t.isdigit():
            k = int(t)
            if self.peek() == "*":
                self.eat("*")
                form = self._var_form(self.eat(), names).scale(k)
            else:
                form = ph.AffineForm((0,) * len(names), 0, k)
        elif t == "(":
            form = self.affine(names)
            self.eat(")")
        else:
            form = self._var_form(t, names)
        return form.neg() if neg else form

    def _var_form(self, t: str, names) -> ph.AffineForm:
        if t == self.param:
            return ph.AffineForm((0,) * len(names), 1, 0)
        if t not in names:
            self.error(f"unknown index {t!r}")
        i = list(names).index(t)
        return ph.AffineForm(tuple(1 if j == i else 0 for j in range(len(names))), 0, 0)

    # ---- expressions -------------------------------------------------------

    def expr(self, names) -> ir.Expression:
        e = self.mul(names)
        while self.peek() in ("+", "-"):
            op = self.eat()
            e = ir.BinaryOp(op, e, self.mul(names))
        return e

    def mul(self, names) -> ir.Expression:
        e = self.atom(names)
        while self.peek() in ("*", "/"):
            op = self.eat()
            e = ir.BinaryOp(op, e, self.atom(names))
        return e

    def atom(self, names) -> ir.Expression:
        t = self.peek()
        if t == "(":
            self.eat("(")
            e = self.expr(names)
            self.eat(")")
            return e
        if t == "-":
            self.eat("-")
            inner = self.atom(names)
            return ir.BinaryOp("-", ir.Const(0), inner)
        if t is not None and t.isdigit():
            self.eat()
            return ir.Const(int(t))
        if t == "reduce":
            return self.reduce_expr(names)
        if t == "case":
            return self.case_expr(names)
        if t in ("min", "max"):
            op = self.eat()
            self.eat("(")
            lhs = self.expr(names)
            self.eat(",")
            rhs = self.expr(names)
            self.eat(")")
            return ir.BinaryOp(op, lhs, rhs)
        nm = self.name()
        self.eat("[")
        args: list[tuple] = []
        while self.peek() != "]":
            if self.peek() == "abs":
                self.eat("abs")
                self.eat("(")
                args.append(("abs", self.affine(names)))
                self.eat(")")
            else:
                args.append(("aff", self.affine(names)))
            if self.peek() == ",":
                self.eat(",")
        self.eat("]")
        return self._read(nm, args, names)

    def _read(self, nm: str, args, names) -> ir.Expression:
        # peel one abs at a time into a sign case
        for k, (tag, form) in enumerate(args):
            if tag != "abs":
                continue
            pos = args[:k] + [("aff", form)] + args[k + 1:]
            neg = args[:k] + [("aff", form.neg())] + args[k + 1:]
            g_pos = ph.ParamPolyhedron(
                tuple(names), (ph.Constraint(form, ph.GE),), self.param or "N"
            )
            g_neg = ph.ParamPolyhedron(
                tuple(names),
                (ph.Constraint(form.neg().shift_const(-1), ph.GE),),
                self.param or "N",
            )
            return ir.Case(
                ((g_pos, self._read(nm, pos, names)), (g_neg, self._read(nm, neg, names)))
            )
        return ir.VarRead(nm, ir.AffineMap(tuple(f for _, f in args)))

    def reduce_expr(self, names) -> ir.ReduceNode:
        self.eat("reduce")
        self.eat("(")
        op = self.eat()
        if op not in ir.OPS:
            self.error(f"unknown reduction operator {op!r}")
        self.eat(",")
        # projection map: [body names] -> [answer affine rows]
        self.eat("[")
        src = []
        while self.peek() != "]":
            src.append(self.name())
            if self.peek() == ",":
                self.eat(",")
        self.eat("]")
        self.eat("->")
        self.eat("[")
        rows = []
        while self.peek() != "]":
            rows.append(self.affine(src))
            if self.peek() == ",":
                self.eat(",")
        self.eat("]")
        self.eat(",")
        dom = self.set_literal(expect_names=src)
        self.eat(",")
        body = self.expr(src)
        self.eat(")")
        if len(rows) != len(names):
            self.error("projection arity does not match the enclosing space")
        return ir.ReduceNode(op, ir.AffineMap(tuple(rows)), dom, body)

    def case_expr(self, names) -> ir.Case:
        self.eat("case")
        self.eat("{")
        branches = []
        while self.peek() != "}":
            g = self.set_literal(expect_names=names)
            self.eat("->")
            e = self.expr(names)
            self.eat(";")
            branches.append((g, e))
        self.eat("}")
        if not branches:
            self.error("empty case")
        return ir.Case(tuple(branches))

    # ---- program ------------------------------------------------------------

    def program(self) -> ir.Program:
        if self.peek() is None:
            self.error("empty input")
        self.eat("param")
        self.param = self.name()
        self.eat(";")
        if self.peek() == "param":
            self.error("programs take a single size parameter")
        decls: list[ir.VarDecl] = []
        while self.peek() in ("input", "output", "local"):
            kind = self.eat()
            scalar = self.eat()
            if scalar not in ir.SCALARS:
                self.error(f"unknown scalar kind {scalar!r}")
            nm = self.name()
            self.eat(":")
            dom = self.set_literal()
            self.eat(";")
            decls.append(ir.VarDecl(nm, kind, dom, scalar))
        eqs = []
        declared = {d.name: d for d in decls}
        while self.peek() is not None:
            if self.peek() == "param":
                self.error("programs take a single size parameter")
            nm = self.name()
            self.eat("[")
            lhs_names = []
            while self.peek() != "]":
                lhs_names.append(self.name())
                if self.peek() == ",":
                    self.eat(",")
            self.eat("]")
            self.eat("=")
            if nm in declared:
                d = declared[nm]
                if len(lhs_names) != d.domain.dim_index:
                    self.error(f"arity mismatch in equation for {nm}")
                if tuple(lhs_names) != d.domain.index_names:
                    # rebind the declared domain to the equation's index names
                    dom = ph.ParamPolyhedron(
                        tuple(lhs_names), d.domain.constraints, d.domain.param_name
                    )
                    declared[nm] = ir.VarDecl(d.name, d.kind, dom, d.scalar)
            e = self.expr(lhs_names)
            self.eat(";")
            eqs.append((nm, e))
        prog = ir.Program(
            self.param,
            tuple(declared[d.name] for d in decls),
            tuple(eqs),
        )
        return prog


def parse(text: str) -> ir.Program:
    """Parse a program; raises SyntaxErrorDiag, then validate() for the rest."""
    return Parser(text).program()


def parse_and_check(text: str):
    prog = parse(text)
    return prog, ir.validate(prog)


# ---------------------------------------------------------------------------
# Printing


def _render_expr(e: ir.Expression, names, param, indent=0) -> str:
    pad = "  " * indent
    if isinstance(e, ir.Const):
        return str(e.value)
    if isinstance(e, ir.VarRead):
        args = ",".join(r.render(names, param) for r in e.access.rows)
        return f"{e.name}[{args}]"
    if isinstance(e, ir.BinaryOp):
        if e.op in ("min", "max"):
            return (
                f"{e.op}({_render_expr(e.lhs, names, param, indent)}, "
                f"{_render_expr(e.rhs, names, param, indent)})"
            )
        lhs = _render_expr(e.lhs, names, param, indent)
        rhs = _render_expr(e.rhs, names, param, indent)
        if isinstance(e.rhs, ir.BinaryOp) and e.op in ("-", "*", "/"):
            rhs = f"({rhs})"
        if isinstance(e.lhs, ir.BinaryOp) and e.lhs.op in ("+", "-") and e.op in ("*", "/"):
            lhs = f"({lhs})"
        return f"{lhs} {e.op} {rhs}"
    if isinstance(e, ir.Case):
        lines = ["case {"]
        for g, sub in e.branches:
            lines.append(
                f"{pad}  {g.render_sorted()} -> {_render_expr(sub, names, param, indent + 1)};"
            )
        lines.append(pad + "}")
        return "\n".join(lines)
    if isinstance(e, ir.ReduceNode):
        body_names = e.body_domain.index_names
        mp = "[%s]->[%s]" % (
            ",".join(body_names),
            ",".join(r.render(body_names, param) for r in e.projection.rows),
        )
        body = _render_expr(e.body, body_names, param, indent)
        return f"reduce({e.op}, {mp}, {e.body_domain.render_sorted()}, {body})"
    raise AssertionError(f"cannot render {e!r}")


def print_program(p: ir.Program) -> str:
    out = []
    for step in p.provenance:
        out.append(f"# {step}")
    out.append(f"param {p.param_name};")
    for v in p.variables:
        out.append(f"{v.kind} {v.scalar} {v.name} : {v.domain.render_sorted()};")
    for nm, e in p.equations:
        names = p.decl(nm).domain.index_names
        lhs = f"{nm}[{','.join(names)}]"
        out.append(f"{lhs} = {_render_expr(e, names, p.param_name, 0)};")
    return "\n".join(out) + "\n"
