"""Canonicalizing rewrites applied after every transformation.

These keep search states in a normal form: cases are flattened and pulled
out of reduction bodies when their guards are invariant over the
accumulation (split into per-branch reductions otherwise), empty branches
are pruned against their context, single-point reductions collapse to the
body at that point, pointwise local definitions are inlined, and unread
locals are dropped.
"""

from __future__ import annotations

from typing import Optional

from . import ir
from . import polyhedron as ph
from .linalg import RatMatrix, in_row_space, solve_rational


def _lift_to_answers(g: ph.ParamPolyhedron, proj: ir.AffineMap, ans_names, param) -> Optional[ph.ParamPolyhedron]:
    """Express a body-space guard whose constraints are invariant over the
    accumulation as a guard over the answer space."""
    cons = []
    for c in g.constraints:
        mt = RatMatrix.from_rows(
            [[row.coeffs[j] for row in proj.rows] for j in range(len(c.form.coeffs))]
        )
        lam = solve_rational(mt, list(c.form.coeffs))
        if lam is None or any(x.denominator != 1 for x in lam):
            return None
        lam_i = [int(x) for x in lam]
        par = c.form.param - sum(l * row.param for l, row in zip(lam_i, proj.rows))
        cst = c.form.const - sum(l * row.const for l, row in zip(lam_i, proj.rows))
        cons.append(ph.Constraint(ph.AffineForm(tuple(lam_i), par, cst), c.kind))
    return ph.ParamPolyhedron(tuple(ans_names), tuple(cons), param)


def _case_up(e: ir.Expression) -> ir.Expression:
    """Inside reduction bodies, pull cases above binary operations and
    flatten nested cases."""
    if isinstance(e, ir.BinaryOp):
        lhs, rhs = _case_up(e.lhs), _case_up(e.rhs)
        if isinstance(lhs, ir.Case):
            return _case_up(
                ir.Case(tuple((g, ir.BinaryOp(e.op, sub, rhs)) for g, sub in lhs.branches))
            )
        if isinstance(rhs, ir.Case):
            return _case_up(
                ir.Case(tuple((g, ir.BinaryOp(e.op, lhs, sub)) for g, sub in rhs.branches))
            )
        return ir.BinaryOp(e.op, lhs, rhs)
    if isinstance(e, ir.Case):
        branches = []
        for g, sub in e.branches:
            sub = _case_up(sub)
            if isinstance(sub, ir.Case):
                for g2, sub2 in sub.branches:
                    branches.append((g.with_constraints(g2.constraints), sub2))
            else:
                branches.append((g, sub))
        return ir.Case(tuple(branches))
    return e


class _Normalizer:
    def __init__(self, program: ir.Program, n_min: int):
        self.program = program
        self.n_min = n_min

    def expr(self, e: ir.Expression, context: ph.ParamPolyhedron, names) -> ir.Expression:
        if isinstance(e, (ir.Const, ir.VarRead)):
            return e
        if isinstance(e, ir.BinaryOp):
            return ir.BinaryOp(
                e.op, self.expr(e.lhs, context, names), self.expr(e.rhs, context, names)
            )
        if isinstance(e, ir.Case):
            branches = []
            for g, sub in e.branches:
                ctx = context.with_constraints(g.constraints)
                if ph.is_empty(ctx, self.n_min):
                    continue
                sub = self.expr(sub, ctx, names)
                if isinstance(sub, ir.Case):
                    for g2, sub2 in sub.branches:
                        branches.append((g.with_constraints(g2.constraints), sub2))
                else:
                    branches.append((g, sub))
            if len(branches) == 1:
                g, sub = branches[0]
                if all(ph.implies(context, c, self.n_min) for c in g.constraints):
                    return sub
            return ir.Case(tuple(branches))
        if isinstance(e, ir.ReduceNode):
            return self.reduce_node(e, context, names)
        raise AssertionError(e)

    def reduce_node(self, red: ir.ReduceNode, context, names) -> ir.Expression:
        body = _case_up(red.body)
        dom = red.body_domain
        if isinstance(body, ir.Case):
            live = []
            for g, sub in body.branches:
                piece = dom.with_constraints(g.constraints)
                if not ph.is_empty(piece, self.n_min):
                    live.append((g, piece, sub))
            if not live:
                body = body.branches[0][1] if body.branches else body
            elif len(live) == 1:
                g, piece, sub = live[0]
                red = ir.ReduceNode(red.op, red.projection, piece, sub)
                return self.reduce_node(red, context, names)
            else:
                proj_rows = [list(r.coeffs) for r in red.projection.rows]
                invariant = all(
                    in_row_space(proj_rows, list(c.form.coeffs))
                    for g, _, _ in live
                    for c in g.constraints
                )
                parts = [
                    ir.ReduceNode(red.op, red.projection, piece, sub)
                    for _, piece, sub in live
                ]
                if invariant:
                    lifted = [
                        _lift_to_answers(g, red.projection, names, dom.param_name)
                        for g, _, _ in live
                    ]
                    if all(l is not None for l in lifted):
                        return self.expr(
                            ir.Case(tuple(zip(lifted, parts))), context, names
                        )
                combined = parts[0]
                for p in parts[1:]:
                    combined = ir.BinaryOp(red.op, combined, p)
                return self.expr(combined, context, names)
        red = ir.ReduceNode(red.op, red.projection, dom, body)
        from .simplify import _try_collapse

        collapsed = _try_collapse(red, context, names, self.n_min)
        if collapsed is not None:
            return self.expr(collapsed, context, names)
        return red


def _inline_pointwise(p: ir.Program, n_min: int) -> ir.Program:
    changed = True
    while changed:
        changed = False
        for v in p.variables:
            if v.kind != "local" or not p.has_equation(v.name):
                continue
            eq = p.equation(v.name)
            if any(isinstance(n, ir.ReduceNode) for n in ir.walk(eq)):
                continue
            if any(r.name == v.name for r in ir.reads_of(eq)):
                continue
            target = v.name

            def subst(e: ir.Expression, names) -> ir.Expression:
                if isinstance(e, ir.VarRead) and e.name == target:
                    return ir.substitute_space(eq, list(e.access.rows), names)
                if isinstance(e, ir.BinaryOp):
                    return ir.BinaryOp(e.op, subst(e.lhs, names), subst(e.rhs, names))
                if isinstance(e, ir.Case):
                    return ir.Case(tuple((g, subst(sub, names)) for g, sub in e.branches))
                if isinstance(e, ir.ReduceNode):
                    return ir.ReduceNode(
                        e.op,
                        e.projection,
                        e.body_domain,
                        subst(e.body, e.body_domain.index_names),
                    )
                return e

            used = False
            eqs = []
            for n, e in p.equations:
                if n == target:
                    eqs.append((n, e))
                    continue
                if any(r.name == target for r in ir.reads_of(e)):
                    used = True
                    eqs.append((n, subst(e, p.decl(n).domain.index_names)))
                else:
                    eqs.append((n, e))
            if used:
                p = ir.Program(p.param_name, p.variables, tuple(eqs), p.provenance)
                changed = True
    return p


def _prune_dead(p: ir.Program) -> ir.Program:
    """Drop local variables not reachable from any output."""
    keep = {v.name for v in p.variables if v.kind != "local"}
    frontier = [v.name for v in p.outputs()]
    while frontier:
        n = frontier.pop()
        if not p.has_equation(n):
            continue
        for r in ir.reads_of(p.equation(n)):
            if r.name not in keep:
                keep.add(r.name)
                frontier.append(r.name)
    if all(v.name in keep for v in p.variables):
        return p
    return ir.Program(
        p.param_name,
        tuple(v for v in p.variables if v.name in keep),
        tuple((n, e) for n, e in p.equations if n in keep),
        p.provenance,
    )


def normalize(p: ir.Program, n_min: int = ph.DEFAULT_N_MIN) -> ir.Program:
    norm = _Normalizer(p, n_min)
    eqs = []
    for n, e in p.equations:
        dom = p.decl(n).domain
        eqs.append((n, norm.expr(e, dom, dom.index_names)))
    p = ir.Program(p.param_name, p.variables, tuple(eqs), p.provenance)
    p = _inline_pointwise(p, n_min)
    p = _prune_dead(p)
    return p
