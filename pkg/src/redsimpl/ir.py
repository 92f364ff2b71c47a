"""Equational program representation.

A program is a set of variables over parameterized domains plus one defining
equation per non-input variable.  Expressions are piecewise-affine reads,
arithmetic over {+, -, *, /, min, max}, guarded cases, and first-class
reduction nodes.

Index-space convention: every expression lives in a *current* index space.
At the top of the equation for V its space is V's answer indices.  A
ReduceNode opens a new space, its `body_domain`: the first names of that
domain are the enclosing context names and the rest are reduction-local
indices; `projection` maps the body space back onto the enclosing space.
Case guards are sets over the current space, and VarRead accesses are
affine maps from the current space into the read variable's space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

from . import polyhedron as ph
from .errors import NonAffineAccess, RecursiveDefinition, RedsimplError
from .linalg import RatMatrix, null_space_basis

# ---------------------------------------------------------------------------
# Operators


@dataclass(frozen=True)
class OperatorSpec:
    symbol: str
    associative: bool = True
    commutative: bool = True
    has_identity: bool = True
    inverse: Optional[str] = None


OPS = {
    "+": OperatorSpec("+", inverse="-"),
    "*": OperatorSpec("*", inverse=None),  # division is unsafe in float mode
    "min": OperatorSpec("min"),
    "max": OperatorSpec("max"),
}

BINOPS = ("+", "-", "*", "/", "min", "max")


# ---------------------------------------------------------------------------
# Affine maps


@dataclass(frozen=True)
class AffineMap:
    rows: tuple[ph.AffineForm, ...]

    @staticmethod
    def identity(d: int) -> "AffineMap":
        return AffineMap(
            tuple(ph.AffineForm(tuple(1 if j == i else 0 for j in range(d))) for i in range(d))
        )

    @staticmethod
    def from_coeff_rows(rows: Sequence[Sequence[int]]) -> "AffineMap":
        return AffineMap(tuple(ph.AffineForm(tuple(r)) for r in rows))

    @property
    def arity_out(self) -> int:
        return len(self.rows)

    def arity_in(self) -> int:
        return len(self.rows[0].coeffs) if self.rows else 0

    def apply(self, point: Sequence[int], n: int) -> tuple[int, ...]:
        return tuple(r.eval(point, n) for r in self.rows)

    def linear_rows(self) -> list[list[int]]:
        return [list(r.coeffs) for r in self.rows]

    def compose_forms(self, forms: Sequence[ph.AffineForm], width: int) -> "AffineMap":
        """Substitute source index i := forms[i] (forms over a new space of
        the given width)."""
        out = []
        for r in self.rows:
            acc = ph.AffineForm((0,) * width, r.param, r.const)
            for c, f in zip(r.coeffs, forms):
                if c:
                    acc = acc.add(f.scale(c))
            out.append(acc)
        return AffineMap(tuple(out))

    def shifted(self, delta: Sequence[int]) -> "AffineMap":
        return AffineMap(tuple(r.shift_const(d) for r, d in zip(self.rows, delta)))

    def coordinate_selection(self) -> Optional[list[int]]:
        """If every row selects exactly one source coordinate (coefficient 1,
        no param/const), return the selected column per row."""
        cols = []
        for r in self.rows:
            if r.param != 0 or r.const != 0:
                return None
            nz = [j for j, c in enumerate(r.coeffs) if c != 0]
            if len(nz) != 1 or r.coeffs[nz[0]] != 1:
                return None
            cols.append(nz[0])
        return cols

    def render(self, src_names: Sequence[str], param: str) -> str:
        body = ",".join(r.render(src_names, param) for r in self.rows)
        return "[%s]->[%s]" % (",".join(src_names), body)


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Const:
    value: object  # int, Fraction, or float

    def __hash__(self):
        return hash(("const", repr(self.value)))


@dataclass(frozen=True)
class VarRead:
    name: str
    access: AffineMap


@dataclass(frozen=True)
class BinaryOp:
    op: str
    lhs: "Expression"
    rhs: "Expression"


@dataclass(frozen=True)
class Case:
    branches: tuple[tuple[ph.ParamPolyhedron, "Expression"], ...]


@dataclass(frozen=True)
class ReduceNode:
    op: str
    projection: AffineMap
    body_domain: ph.ParamPolyhedron
    body: "Expression"

    @property
    def spec(self) -> OperatorSpec:
        return OPS[self.op]


Expression = Union[Const, VarRead, BinaryOp, Case, ReduceNode]


def walk(expr: Expression):
    """Yield every node of the expression tree, preorder."""
    yield expr
    if isinstance(expr, BinaryOp):
        yield from walk(expr.lhs)
        yield from walk(expr.rhs)
    elif isinstance(expr, Case):
        for _, e in expr.branches:
            yield from walk(e)
    elif isinstance(expr, ReduceNode):
        yield from walk(expr.body)


def reads_of(expr: Expression) -> list[VarRead]:
    return [e for e in walk(expr) if isinstance(e, VarRead)]


def reduces_of(expr: Expression) -> list[ReduceNode]:
    return [e for e in walk(expr) if isinstance(e, ReduceNode)]


def rewrite(expr: Expression, fn: Callable[[Expression], Optional[Expression]]) -> Expression:
    """Bottom-up rewrite; fn returns a replacement or None to keep the node."""
    if isinstance(expr, BinaryOp):
        expr = BinaryOp(expr.op, rewrite(expr.lhs, fn), rewrite(expr.rhs, fn))
    elif isinstance(expr, Case):
        expr = Case(tuple((g, rewrite(e, fn)) for g, e in expr.branches))
    elif isinstance(expr, ReduceNode):
        expr = ReduceNode(expr.op, expr.projection, expr.body_domain, rewrite(expr.body, fn))
    out = fn(expr)
    return expr if out is None else out


def substitute_space(expr: Expression, forms: Sequence[ph.AffineForm], new_names: Sequence[str]) -> Expression:
    """Re-index an expression: old index i := forms[i] over the new space."""
    width = len(new_names)
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, VarRead):
        return VarRead(expr.name, expr.access.compose_forms(forms, width))
    if isinstance(expr, BinaryOp):
        return BinaryOp(
            expr.op,
            substitute_space(expr.lhs, forms, new_names),
            substitute_space(expr.rhs, forms, new_names),
        )
    if isinstance(expr, Case):
        return Case(
            tuple(
                (ph.substitute(g, new_names, forms), substitute_space(e, forms, new_names))
                for g, e in expr.branches
            )
        )
    if isinstance(expr, ReduceNode):
        body_names = expr.body_domain.index_names
        n_ctx = len(forms)  # context width of the old space
        locals_ = body_names[n_ctx:]
        ext_names = tuple(new_names) + locals_
        ext_forms = [
            ph.AffineForm(f.coeffs + (0,) * len(locals_), f.param, f.const) for f in forms
        ]
        for k in range(len(locals_)):
            ext_forms.append(
                ph.AffineForm(
                    tuple(1 if j == width + k else 0 for j in range(width + len(locals_))), 0, 0
                )
            )
        return ReduceNode(
            expr.op,
            expr.projection.compose_forms(ext_forms, width + len(locals_)),
            ph.substitute(expr.body_domain, ext_names, ext_forms),
            substitute_space(expr.body, ext_forms, ext_names),
        )
    raise NonAffineAccess(f"unknown expression node {expr!r}")


def shift_expression(expr: Expression, names: Sequence[str], rho: Sequence[int]) -> Expression:
    """Evaluate the expression at z + rho instead of z (same index space)."""
    d = len(names)
    forms = [
        ph.AffineForm(tuple(1 if j == i else 0 for j in range(d)), 0, rho[i]) for i in range(d)
    ]
    return substitute_space(expr, forms, names)


# ---------------------------------------------------------------------------
# Declarations and programs

KINDS = ("input", "output", "local")
SCALARS = ("int", "rat", "float")


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str
    domain: ph.ParamPolyhedron
    scalar: str = "int"


@dataclass(frozen=True)
class Program:
    param_name: str
    variables: tuple[VarDecl, ...]
    equations: tuple[tuple[str, Expression], ...]
    provenance: tuple[str, ...] = ()

    def decl(self, name: str) -> VarDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def has_var(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    def equation(self, name: str) -> Expression:
        for n, e in self.equations:
            if n == name:
                return e
        raise KeyError(name)

    def has_equation(self, name: str) -> bool:
        return any(n == name for n, _ in self.equations)

    def inputs(self) -> list[VarDecl]:
        return [v for v in self.variables if v.kind == "input"]

    def outputs(self) -> list[VarDecl]:
        return [v for v in self.variables if v.kind == "output"]

    def with_equation(self, name: str, expr: Expression) -> "Program":
        eqs = tuple((n, expr if n == name else e) for n, e in self.equations)
        return replace(self, equations=eqs)

    def with_local(self, decl: VarDecl, expr: Expression, after: str) -> "Program":
        """Insert a new local with its equation just before `after`'s equation."""
        vars_ = []
        for v in self.variables:
            if v.name == after:
                vars_.append(decl)
            vars_.append(v)
        eqs = []
        for n, e in self.equations:
            if n == after:
                eqs.append((decl.name, expr))
            eqs.append((n, e))
        return replace(self, variables=tuple(vars_), equations=tuple(eqs))

    def with_step(self, step: str) -> "Program":
        return replace(self, provenance=self.provenance + (step,))

    def fresh_name(self, base: str) -> str:
        if not self.has_var(base):
            return base
        for i in itertools.count(2):
            cand = f"{base}{i}"
            if not self.has_var(cand):
                return cand
        raise AssertionError

    def canonical_text(self) -> str:
        from . import frontend

        return frontend.print_program(replace(self, provenance=()))

    def __hash__(self):
        return hash(self.canonical_text())

    def __eq__(self, other):
        return isinstance(other, Program) and self.canonical_text() == other.canonical_text()


# ---------------------------------------------------------------------------
# Diagnostics / validation


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: Optional[tuple[int, int]] = None


def validate(p: Program) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def err(code, msg):
        diags.append(Diagnostic("error", code, msg))

    names = {v.name for v in p.variables}
    eq_names = [n for n, _ in p.equations]
    for v in p.variables:
        if v.kind == "input":
            if v.name in eq_names:
                err("INPUT_EQUATION", f"input {v.name} must not have an equation")
        else:
            if eq_names.count(v.name) != 1:
                err("MISSING_EQUATION", f"{v.name} needs exactly one equation")
        if len(v.domain.index_names) != v.domain.dim_index:
            err("ARITY_MISMATCH", f"bad domain for {v.name}")
    for n, e in p.equations:
        if n not in names:
            err("UNDECLARED_VAR", f"equation for undeclared variable {n}")
            continue
        space = p.decl(n).domain.index_names
        _validate_expr(p, e, len(space), diags)
        _validate_cases(p, e, p.decl(n).domain, diags)
    return diags


def _validate_expr(p: Program, e: Expression, width: int, diags: list):
    if isinstance(e, VarRead):
        if not p.has_var(e.name):
            diags.append(Diagnostic("error", "UNDECLARED_VAR", f"read of undeclared {e.name}"))
            return
        decl = p.decl(e.name)
        if e.access.arity_out != decl.domain.dim_index or e.access.arity_in() != width:
            diags.append(Diagnostic("error", "ARITY_MISMATCH", f"bad access to {e.name}"))
    elif isinstance(e, BinaryOp):
        if e.op not in BINOPS:
            diags.append(Diagnostic("error", "BAD_OP", f"unknown operator {e.op}"))
        _validate_expr(p, e.lhs, width, diags)
        _validate_expr(p, e.rhs, width, diags)
    elif isinstance(e, Case):
        for g, sub in e.branches:
            if g.dim_index != width:
                diags.append(Diagnostic("error", "ARITY_MISMATCH", "guard arity mismatch"))
            _validate_expr(p, sub, width, diags)
    elif isinstance(e, ReduceNode):
        if e.op not in OPS:
            diags.append(Diagnostic("error", "BAD_OP", f"unknown reduction operator {e.op}"))
        if e.projection.arity_out != width or e.projection.arity_in() != e.body_domain.dim_index:
            diags.append(Diagnostic("error", "ARITY_MISMATCH", "bad reduction projection"))
        _validate_expr(p, e.body, e.body_domain.dim_index, diags)


def _validate_cases(p: Program, e: Expression, context: ph.ParamPolyhedron, diags: list):
    for node in walk(e):
        if not isinstance(node, Case):
            continue
        guards = [g for g, _ in node.branches]
        for a, b in itertools.combinations(range(len(guards)), 2):
            inter = guards[a].with_constraints(guards[b].constraints)
            if not ph.is_empty(inter):
                diags.append(
                    Diagnostic(
                        "error", "GUARD_OVERLAP", f"case branches {a} and {b} overlap"
                    )
                )
        # coverage checked by probing when the case sits at the equation top
        if node is e:
            for n in (ph.DEFAULT_N_MIN, ph.DEFAULT_N_MIN + 3):
                try:
                    want = set(ph.enumerate_points(context, n))
                except RedsimplError:
                    continue
                got = set()
                for g, _ in node.branches:
                    got |= set(ph.enumerate_points(g.with_constraints(context.constraints), n))
                if want - got:
                    diags.append(
                        Diagnostic(
                            "error",
                            "COVERAGE_GAP",
                            f"case does not cover {len(want - got)} points at N={n}",
                        )
                    )
                    break
    return diags


# ---------------------------------------------------------------------------
# Reduction analysis


def dependence_map(red: ReduceNode) -> AffineMap:
    """Stacked affine map of every read access and every case-guard form in
    the body; its null space is the reuse space of the reduction."""
    rows: list[ph.AffineForm] = []
    for node in walk(red.body):
        if isinstance(node, ReduceNode):
            raise NonAffineAccess("dependence map of a body containing a nested reduction")
        if isinstance(node, VarRead):
            rows.extend(node.access.rows)
        elif isinstance(node, Case):
            for g, _ in node.branches:
                rows.extend(c.form for c in g.constraints)
    return AffineMap(tuple(rows))


def reuse_basis(red: ReduceNode, extra_equalities: Sequence[Sequence[int]] = ()) -> list[tuple[int, ...]]:
    """Primitive basis of the reuse space: null space of the dependence map
    intersected with the given equality directions (face lineality)."""
    rows = [list(r.coeffs) for r in dependence_map(red).rows]
    rows += [list(v) for v in extra_equalities]
    rows = [r for r in rows if any(r)]
    if not rows:
        d = red.body_domain.dim_index
        return [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
    return null_space_basis(RatMatrix.from_rows(rows))


def accumulation_basis(red: ReduceNode) -> list[tuple[int, ...]]:
    rows = [list(r.coeffs) for r in red.projection.rows]
    rows = [r for r in rows if any(r)]
    if not rows:
        d = red.body_domain.dim_index
        return [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
    return null_space_basis(RatMatrix.from_rows(rows))


# ---------------------------------------------------------------------------
# Definition substitution


def substitute_definition(p: Program, use_var: str, def_var: str) -> Program:
    """Inline def_var's definition into the equation of use_var.

    Pointwise definitions are inlined directly.  When the definition is a
    reduction and it is read as the entire body of a same-operator reduction
    (or at the top of the equation), the two reductions are composed into
    one flat reduction over the glued body domain.
    """
    if not p.has_equation(def_var):
        raise RecursiveDefinition(f"{def_var} has no equation to inline")
    def_eq = p.equation(def_var)
    if any(r.name == def_var for r in reads_of(def_eq)):
        raise RecursiveDefinition(f"{def_var} is defined recursively")
    use_eq = p.equation(use_var)
    if not any(r.name == def_var for r in reads_of(use_eq)):
        return p

    def subst(expr: Expression, space_names: Sequence[str]) -> Expression:
        if isinstance(expr, VarRead) and expr.name == def_var:
            if isinstance(def_eq, ReduceNode):
                return _compose_read_with_reduce(p, expr, def_eq, space_names)
            forms = list(expr.access.rows)
            return substitute_space(def_eq, forms, space_names)
        if isinstance(expr, BinaryOp):
            return BinaryOp(
                expr.op, subst(expr.lhs, space_names), subst(expr.rhs, space_names)
            )
        if isinstance(expr, Case):
            return Case(tuple((g, subst(e, space_names)) for g, e in expr.branches))
        if isinstance(expr, ReduceNode):
            if (
                isinstance(expr.body, VarRead)
                and expr.body.name == def_var
                and isinstance(def_eq, ReduceNode)
                and def_eq.op == expr.op
            ):
                return _flatten_reduce_of_reduce(p, expr, def_eq)
            return ReduceNode(
                expr.op,
                expr.projection,
                expr.body_domain,
                subst(expr.body, expr.body_domain.index_names),
            )
        return expr

    space = p.decl(use_var).domain.index_names
    new_eq = subst(use_eq, space)
    return p.with_equation(use_var, new_eq).with_step(
        f"substitute {def_var} into {use_var}"
    )


def _fresh_locals(taken: Sequence[str], names: Sequence[str]) -> list[str]:
    out = []
    used = set(taken)
    for nm in names:
        cand = nm
        i = 2
        while cand in used:
            cand = f"{nm}{i}"
            i += 1
        used.add(cand)
        out.append(cand)
    return out


def _glue(p, access: AffineMap, inner: ReduceNode, outer_names, outer_dom_constraints):
    """Common composition machinery: body space = outer space ++ inner locals."""
    sel = inner.projection.coordinate_selection()
    if sel is None:
        raise NonAffineAccess(
            "inner reduction projection must select coordinates to compose"
        )
    inner_names = inner.body_domain.index_names
    local_cols = [j for j in range(len(inner_names)) if j not in sel]
    local_names = _fresh_locals(outer_names, [inner_names[j] for j in local_cols])
    width = len(outer_names) + len(local_names)

    def lift(f: ph.AffineForm) -> ph.AffineForm:
        return ph.AffineForm(f.coeffs + (0,) * len(local_names), f.param, f.const)

    forms = [None] * len(inner_names)
    for row, col in zip(access.rows, sel):
        forms[col] = lift(row)
    for k, col in enumerate(local_cols):
        forms[col] = ph.AffineForm(
            tuple(1 if j == len(outer_names) + k else 0 for j in range(width)), 0, 0
        )
    new_names = tuple(outer_names) + tuple(local_names)
    inner_dom = ph.substitute(inner.body_domain, new_names, forms)
    glued = ph.ParamPolyhedron(
        new_names,
        tuple(ph.Constraint(lift(c.form), c.kind) for c in outer_dom_constraints)
        + inner_dom.constraints,
        p.param_name,
    )
    body = substitute_space(inner.body, forms, new_names)
    return glued, body, new_names, len(outer_names)


def _flatten_reduce_of_reduce(p: Program, outer: ReduceNode, inner: ReduceNode) -> ReduceNode:
    read = outer.body
    glued, body, new_names, n_outer = _glue(
        p, read.access, inner, outer.body_domain.index_names, outer.body_domain.constraints
    )
    proj = AffineMap(
        tuple(
            ph.AffineForm(r.coeffs + (0,) * (len(new_names) - n_outer), r.param, r.const)
            for r in outer.projection.rows
        )
    )
    return ReduceNode(outer.op, proj, glued, body)


def _compose_read_with_reduce(
    p: Program, read: VarRead, inner: ReduceNode, space_names: Sequence[str]
) -> ReduceNode:
    glued, body, new_names, n_outer = _glue(p, read.access, inner, space_names, ())
    proj = AffineMap(
        tuple(
            ph.AffineForm(
                tuple(1 if j == i else 0 for j in range(len(new_names))), 0, 0
            )
            for i in range(n_outer)
        )
    )
    return ReduceNode(inner.op, proj, glued, body)
