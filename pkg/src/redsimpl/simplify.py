"""The simplification engine.

Single-step simplification turns a reduction with reuse along rho into a
recurrence over the answer space plus residual reductions on facet slabs of
the body.  Labeling enumeration partitions the (generally infinite) choice
of rho into sign classes over the facet normals; a reuse-vector heuristic
picks one representative per class.  Reduction decomposition and
distributivity factoring expose reuse where none is directly available.
`simplify_all` searches the closure of these moves and reports every
fully-simplified program of strictly lower asymptotic degree.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import counting, facelattice as fl, ir
from . import polyhedron as ph
from .errors import (
    Degenerate,
    DependentIndex,
    NeedsInverse,
    NoReuse,
    NotDistributive,
    NotInvariant,
    RadiusExhausted,
)
from .linalg import (
    IntVector,
    RatMatrix,
    in_row_space,
    ivec_dot,
    ivec_primitive,
    null_space_basis,
    solve_rational,
)

PLUS, MINUS, ZERO = "+", "-", "0"


@dataclass(frozen=True)
class ReuseSpace:
    basis: tuple[IntVector, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass
class Labeling:
    assignment: tuple[tuple[int, str], ...]  # (constraint index, sign)
    reuse_set: ph.ParamPolyhedron
    chosen_rho: Optional[IntVector] = None

    def sign_of(self, idx: int) -> str:
        for i, s in self.assignment:
            if i == idx:
                return s
        raise KeyError(idx)


@dataclass(frozen=True)
class Variant:
    program: ir.Program
    trace: tuple[str, ...]
    complexity: counting.QuasiPolynomial
    degree: int


@dataclass
class SearchResult:
    variants: list[Variant]
    budget_exceeded: bool = False
    explored: int = 0
    original_degree: int = -1


# ---------------------------------------------------------------------------
# Reuse space and labelings


def _space_equalities(basis: Sequence[IntVector], names, param) -> list[ph.Constraint]:
    """Equality constraints whose solution set is span(basis)."""
    if not basis:
        return [
            ph.Constraint(
                ph.AffineForm(tuple(1 if j == i else 0 for j in range(len(names)))), ph.EQ
            )
            for i in range(len(names))
        ]
    ortho = null_space_basis(RatMatrix.from_rows([list(b) for b in basis]))
    return [ph.Constraint(ph.AffineForm(tuple(w)), ph.EQ) for w in ortho]


def reduction_reuse(red: ir.ReduceNode, n_min: int = ph.DEFAULT_N_MIN) -> ReuseSpace:
    """Reuse space of a reduction, restricted to directions that keep the
    (possibly thick) body geometry invariant."""
    dnr = ph.remove_redundancy(red.body_domain, n_min)
    lineality = ph.saturated_directions(dnr, n_min)
    return ReuseSpace(tuple(ir.reuse_basis(red, lineality)))


def enumerate_labelings(
    face: fl.Face, reuse: ReuseSpace, lat: fl.FaceLattice
) -> list[Labeling]:
    """All facet sign assignments with a non-empty set of inducing reuse
    vectors.  Facets orthogonal to the whole reuse space are forced to the
    no-contribution label before enumeration."""
    if reuse.dim == 0:
        raise NoReuse("reduction has no reuse to exploit")
    facets = fl.facets(lat, face)
    names = face.geometry.index_names
    param = face.geometry.param_name
    normals = []
    for f in facets:
        (idx,) = f.saturation_set - face.saturation_set
        normals.append((idx, face.geometry.constraints[idx].form.coeffs))
    forced = [
        (idx, nu) for idx, nu in normals if all(ivec_dot(nu, b) == 0 for b in reuse.basis)
    ]
    free = [(idx, nu) for idx, nu in normals if (idx, nu) not in forced]
    eqs = _space_equalities(reuse.basis, names, param)

    def build(assign: dict[int, str]) -> ph.ParamPolyhedron:
        cons = list(eqs)
        for idx, nu in normals:
            sign = assign[idx]
            form = ph.AffineForm(nu)
            if sign == PLUS:
                cons.append(ph.Constraint(form.shift_const(-1), ph.GE))
            elif sign == MINUS:
                cons.append(ph.Constraint(form.neg().shift_const(-1), ph.GE))
            else:
                cons.append(ph.Constraint(form, ph.EQ))
        return ph.ParamPolyhedron(names, tuple(cons), param)

    out: list[Labeling] = []

    def emit(assign: dict[int, str]):
        if all(s == ZERO for s in assign.values()):
            return  # only the zero vector induces the all-zero labeling
        rset = build(assign)
        if ph.is_empty(rset):
            return
        ordered = tuple(sorted(assign.items()))
        out.append(Labeling(ordered, rset))

    if reuse.dim == 1:
        v = reuse.basis[0]
        for vec in (v, tuple(-x for x in v)):
            assign = {idx: ZERO for idx, _ in forced}
            for idx, nu in free:
                d = ivec_dot(nu, vec)
                assign[idx] = PLUS if d > 0 else MINUS if d < 0 else ZERO
            emit(assign)
        # dedupe (v and -v can induce the same labeling only if all zero)
        seen = set()
        uniq = []
        for l in out:
            if l.assignment not in seen:
                seen.add(l.assignment)
                uniq.append(l)
        return uniq

    for signs in itertools.product((PLUS, MINUS, ZERO), repeat=len(free)):
        assign = {idx: ZERO for idx, _ in forced}
        for (idx, _), s in zip(free, signs):
            assign[idx] = s
        emit(assign)
    return out


def select_rho(labeling: Labeling, radius_cap: Optional[int] = None) -> IntVector:
    """Smallest integer point of the labeling's reuse set (L1 norm, then
    lexicographically largest), stored into the labeling."""
    rho = ph.smallest_point(labeling.reuse_set, radius_cap)
    labeling.chosen_rho = rho
    return rho


# ---------------------------------------------------------------------------
# Single-step simplification


def _compose_through(map_: ir.AffineMap, g: ph.AffineForm) -> ph.AffineForm:
    """g over the answer space composed with an affine projection: returns
    the body-space form g(proj(z))."""
    width = len(map_.rows[0].coeffs) if map_.rows else 0
    acc = ph.AffineForm((0,) * width, g.param, g.const)
    for coef, row in zip(g.coeffs, map_.rows):
        if coef:
            acc = acc.add(row.scale(coef))
    return acc


def _preimage_constraints(region: ph.ParamPolyhedron, proj: ir.AffineMap) -> list[ph.Constraint]:
    return [ph.Constraint(_compose_through(proj, c.form), c.kind) for c in region.constraints]


def image_of(
    dom: ph.ParamPolyhedron, proj: ir.AffineMap, ans_names: Sequence[str]
) -> ph.ParamPolyhedron:
    """Rational image of dom under the projection, as a set over ans_names."""
    m = len(ans_names)
    d = dom.dim_index
    names = tuple(ans_names) + tuple(f"__z{i}" for i in range(d))
    cons = []
    for c in dom.constraints:
        cons.append(ph.Constraint(ph.AffineForm((0,) * m + c.form.coeffs, c.form.param, c.form.const), c.kind))
    for r, row in enumerate(proj.rows):
        coeffs = tuple(-1 if j == r else 0 for j in range(m)) + row.coeffs
        cons.append(ph.Constraint(ph.AffineForm(coeffs, row.param, row.const), ph.EQ))
    big = ph.ParamPolyhedron(names, tuple(cons), dom.param_name)
    return ph.project(big, list(range(m)))


def _try_collapse(
    red: ir.ReduceNode, context: ph.ParamPolyhedron, ans_names, n_min=ph.DEFAULT_N_MIN
) -> Optional[ir.Expression]:
    """Replace a reduction whose body domain holds a single point per
    demanded answer by the body at that point, expressed over the answers."""
    dom = red.body_domain
    d = dom.dim_index
    if ph.is_empty(dom, n_min):
        return None
    eq_forms = [c.form for c in dom.constraints if c.kind == ph.EQ]
    ge_left = []
    for c in dom.constraints:
        if c.kind != ph.GE:
            continue
        if ph.is_empty(dom.with_constraints([ph.Constraint(c.form.shift_const(-1), ph.GE)]), n_min):
            eq_forms.append(c.form)  # implied equality
        else:
            ge_left.append(c.form)
    rows = [list(r.coeffs) for r in red.projection.rows] + [list(f.coeffs) for f in eq_forms]
    from .linalg import int_row_rank

    if int_row_rank(rows) < d:
        return None
    # solve for z as an affine function of (answers, N)
    m = len(red.projection.rows)
    mat = RatMatrix.from_rows(rows)
    # rhs rows as affine forms over the answer space
    rhs: list[ph.AffineForm] = []
    for r_i, row in enumerate(red.projection.rows):
        rhs.append(
            ph.AffineForm(tuple(1 if j == r_i else 0 for j in range(m)), -row.param, -row.const)
        )
    for f in eq_forms:
        rhs.append(ph.AffineForm((0,) * m, -f.param, -f.const))
    solved = _solve_affine(mat, rhs, m)
    if solved is None:
        return None
    sol, conds = solved
    # overdetermined rows and leftover constraints must hold on the context
    for form in conds:
        if not ph.implies(context, ph.Constraint(form, ph.EQ), n_min):
            return None
    for f in ge_left:
        comp = _subst_form(f, sol, m)
        if comp is None:
            return None
        if not ph.implies(context, ph.Constraint(comp, ph.GE), n_min):
            return None
    for f in eq_forms:
        comp = _subst_form(f, sol, m)
        if comp is None or not ph.implies(context, ph.Constraint(comp, ph.EQ), n_min):
            return None
    return ir.substitute_space(red.body, sol, ans_names)


def _solve_affine(
    mat: RatMatrix, rhs: list[ph.AffineForm], m: int
) -> Optional[tuple[list[ph.AffineForm], list[ph.AffineForm]]]:
    """Solve mat * z = rhs where rhs entries are affine forms over m answer
    variables.  Returns (solution forms, residual forms that must vanish on
    the demanded answer region), or None when no integer-affine solution
    exists."""
    n = mat.cols
    rows = [list(r) for r in mat.entries]
    vecs = [[Fraction(x) for x in (f.coeffs + (f.param, f.const))] for f in rhs]
    piv_cols = []
    r = 0
    for c in range(n):
        pr = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        vecs[r], vecs[pr] = vecs[pr], vecs[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        vecs[r] = [x / pv for x in vecs[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
                vecs[i] = [x - f * y for x, y in zip(vecs[i], vecs[r])]
        piv_cols.append(c)
        r += 1
    if len(piv_cols) < n:
        return None

    def to_form(v: list[Fraction]) -> Optional[ph.AffineForm]:
        lcm = 1
        for x in v:
            lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
        w = [x * lcm for x in v]
        return ph.AffineForm(tuple(int(x) for x in w[:m]), int(w[m]), int(w[m + 1]))

    conds = []
    for i in range(r, len(rows)):
        if any(vecs[i]):
            conds.append(to_form(vecs[i]))
    sol = [None] * n
    for ri, c in enumerate(piv_cols):
        v = vecs[ri]
        if any(x.denominator != 1 for x in v):
            return None
        sol[c] = ph.AffineForm(tuple(int(x) for x in v[:m]), int(v[m]), int(v[m + 1]))
    return sol, conds  # type: ignore[return-value]


def _subst_form(f: ph.AffineForm, sol: list[ph.AffineForm], m: int) -> Optional[ph.AffineForm]:
    acc = ph.AffineForm((0,) * m, f.param, f.const)
    for coef, s in zip(f.coeffs, sol):
        if coef:
            acc = acc.add(s.scale(coef))
    return acc


def single_step_simplify(
    program: ir.Program,
    var: str,
    labeling: Labeling,
    n_min: int = ph.DEFAULT_N_MIN,
    allow_division: bool = False,
) -> ir.Program:
    """Rewrite var's reduction as a recurrence along the labeling's reuse
    vector plus residual facet contributions.

    Division as the inverse of * is numerically unsafe in float mode and is
    only used when allow_division is set (exact-rational programs)."""
    red = program.equation(var)
    if not isinstance(red, ir.ReduceNode):
        raise Degenerate(f"{var} is not defined by a bare reduction")
    if labeling.chosen_rho is None:
        select_rho(labeling)
    rho = labeling.chosen_rho
    dom = ph.remove_redundancy(red.body_domain, n_min)
    if ph.dimension(dom, n_min) == 0:
        raise Degenerate("reduction body is zero-dimensional")
    delta = tuple(r.eval_linear(rho) for r in red.projection.rows)
    if not any(delta):
        raise Degenerate("reuse vector does not advance the answer index")
    a_dom = program.decl(var).domain
    ans_names = a_dom.index_names
    spec = red.spec
    inverse_op = spec.inverse
    if inverse_op is None and red.op == "*" and allow_division:
        inverse_op = "/"

    # answer-space split: base slabs where the shifted answer leaves the
    # domain, interior where the recurrence applies
    shifted = []
    for c in a_dom.constraints:
        mu = c.form.eval_linear(delta)
        shifted.append((c, ph.Constraint(c.form.shift_const(-mu), c.kind), mu))
    for c, sc, mu in shifted:
        if c.kind == ph.EQ and mu != 0:
            raise Degenerate("recurrence leaves an equality-pinned answer set")
    interior = a_dom.with_constraints([sc for _, sc, mu in shifted if mu > 0])
    if ph.is_empty(interior, n_min):
        raise Degenerate("recurrence has no interior answers")
    base_regions = []
    earlier: list[ph.Constraint] = []
    for c, sc, mu in shifted:
        if c.kind != ph.GE or mu <= 0:
            continue
        viol = ph.Constraint(sc.form.neg().shift_const(-1), ph.GE)
        region = a_dom.with_constraints(earlier + [viol])
        if not ph.is_empty(region, n_min):
            base_regions.append(region)
        earlier.append(sc)

    # facet slabs
    fixed = dict(labeling.assignment)
    plus_pieces: list[ph.ParamPolyhedron] = []
    minus_pieces: list[ph.ParamPolyhedron] = []
    interior_pre = _preimage_constraints(interior, red.projection)
    shifted_proj = red.projection.shifted(delta)
    interior_pre_shift = _preimage_constraints(interior, shifted_proj)
    prev_plus: list[ph.Constraint] = []
    prev_minus: list[ph.Constraint] = []
    for idx, sign in sorted(fixed.items()):
        f = dom.constraints[idx].form
        s = f.eval_linear(rho)
        if (s > 0) != (sign == PLUS) or (s < 0) != (sign == MINUS):
            raise Degenerate(f"labeling sign for facet {idx} does not match rho")
        if sign == PLUS:
            slab = ph.Constraint(f.neg().shift_const(s - 1), ph.GE)
            piece = dom.with_constraints([slab] + prev_plus + interior_pre)
            if not ph.is_empty(piece, n_min):
                plus_pieces.append(piece)
            prev_plus.append(ph.Constraint(f.shift_const(-s), ph.GE))
        elif sign == MINUS:
            slab = ph.Constraint(f.neg().shift_const(-s - 1), ph.GE)
            piece = dom.with_constraints([slab] + prev_minus + interior_pre_shift)
            if not ph.is_empty(piece, n_min):
                minus_pieces.append(piece)
            prev_minus.append(ph.Constraint(f.shift_const(s), ph.GE))
    if minus_pieces and inverse_op is None:
        raise NeedsInverse(
            f"{red.op} has no inverse and a contributing facet needs subtraction"
        )

    # assemble the new case equation
    rho_text = "[" + ",".join(str(x) for x in rho) + "]"
    prog = program

    def emit_piece(piece, proj, region, tag):
        nonlocal prog
        node = ir.ReduceNode(red.op, proj, piece, red.body)
        collapsed = _try_collapse(node, region, ans_names, n_min)
        if collapsed is not None:
            return collapsed
        # domain is the read region, not the piece image: where the piece is
        # empty the value is the operator identity
        vdom = ph.remove_redundancy(region, n_min)
        name = prog.fresh_name(f"{var}_{tag}")
        decl = ir.VarDecl(name, "local", vdom, prog.decl(var).scalar)
        prog = prog.with_local(decl, node, after=var)
        return ir.VarRead(name, ir.AffineMap.identity(len(ans_names)))

    branches = []
    for t, region in enumerate(base_regions):
        piece = dom.with_constraints(_preimage_constraints(region, red.projection))
        if ph.is_empty(piece, n_min):
            continue
        branches.append((region, ("base", piece, region, f"b{t}")))
    branches.append((interior, None))

    new_branches = []
    for region, info in branches:
        if info is None:
            expr: ir.Expression = ir.VarRead(
                var, ir.AffineMap.identity(len(ans_names)).shifted(tuple(-d for d in delta))
            )
            for k, piece in enumerate(plus_pieces):
                term = emit_piece(piece, red.projection, interior, f"p{k}")
                expr = ir.BinaryOp(red.op, expr, term)
            for k, piece in enumerate(minus_pieces):
                term = emit_piece(piece, shifted_proj, interior, f"m{k}")
                expr = ir.BinaryOp(inverse_op, expr, term)
            new_branches.append((interior, expr))
        else:
            _, piece, reg, tag = info
            new_branches.append((region, emit_piece(piece, red.projection, reg, tag)))

    case = ir.Case(tuple((g, e) for g, e in new_branches))
    prog = prog.with_equation(var, case).with_step(
        f"simplify {var} along rho={rho_text} (delta={list(delta)})"
    )
    return prog


# ---------------------------------------------------------------------------
# Decomposition and distributivity


def _local_columns(red: ir.ReduceNode) -> list[int]:
    sel = red.projection.coordinate_selection()
    if sel is None:
        raise Degenerate("reduction projection must select coordinates")
    return [j for j in range(red.body_domain.dim_index) if j not in sel]


def propose_decompositions(red: ir.ReduceNode) -> list[ph.AffineForm]:
    """Candidate change-of-basis indices: read-access rows and domain
    constraint directions with a nonzero reduction-local part, deduplicated
    up to sign and primitivity of that part."""
    locals_ = set(_local_columns(red))
    rows: list[ph.AffineForm] = list(ir.dependence_map(red).rows)
    if not rows:
        return []  # nothing is read, so there is no reuse to expose
    for c in red.body_domain.constraints:
        rows.append(c.form)
    seen = set()
    out = []
    for r in rows:
        loc = tuple(r.coeffs[j] if j in locals_ else 0 for j in range(len(r.coeffs)))
        if not any(loc):
            continue
        key = ivec_primitive(loc)
        if key in seen:
            continue
        seen.add(key)
        form = ph.AffineForm(r.coeffs, 0, 0)
        lead = next(x for x in loc if x != 0)
        if lead < 0:
            form = form.neg()
        out.append(form)
    return out


_INDEX_POOL = ("m", "l", "t", "u", "w", "v")


def decompose(
    program: ir.Program, var: str, new_index: ph.AffineForm, n_min: int = ph.DEFAULT_N_MIN
) -> ir.Program:
    """Change of basis to new_index followed by splitting into nested
    single-variable reductions; the inner reduction is hoisted to a fresh
    local variable."""
    red = program.equation(var)
    if not isinstance(red, ir.ReduceNode):
        raise Degenerate(f"{var} is not defined by a bare reduction")
    locals_ = _local_columns(red)
    if len(locals_) < 2:
        raise DependentIndex("decomposition needs at least two accumulation indices")
    loc_part = [new_index.coeffs[j] if j in locals_ else 0 for j in range(len(new_index.coeffs))]
    if not any(loc_part):
        raise DependentIndex("new index is a combination of answer indices only")
    victim = next((j for j in locals_ if abs(new_index.coeffs[j]) == 1), None)
    if victim is None:
        raise DependentIndex("new index has no unit-coefficient local to replace")

    body_names = red.body_domain.index_names
    sel = red.projection.coordinate_selection()
    ans_cols = list(sel)
    used = set(body_names)
    m_name = next((nm for nm in _INDEX_POOL if nm not in used), None)
    if m_name is None:
        m_name = f"m{len(body_names)}"
    # new body space: answers..., m, remaining locals (victim removed)
    rem_locals = [j for j in locals_ if j != victim]
    new_order = ans_cols + [victim] + rem_locals
    new_names = tuple(
        m_name if j == victim else body_names[j] for j in new_order
    )
    width = len(new_names)

    def unit(pos):
        return ph.AffineForm(tuple(1 if j == pos else 0 for j in range(width)), 0, 0)

    pos_of = {j: k for k, j in enumerate(new_order)}
    cv = new_index.coeffs[victim]
    # victim = (m - rest)/cv with cv = +-1
    rest = ph.AffineForm((0,) * width, new_index.param, new_index.const)
    for j, c in enumerate(new_index.coeffs):
        if j == victim or c == 0:
            continue
        rest = rest.add(unit(pos_of[j]).scale(c))
    victim_form = unit(pos_of[victim]).add(rest.neg()).scale(cv)  # cv in {1,-1}

    forms = []
    for j in range(len(body_names)):
        forms.append(victim_form if j == victim else unit(pos_of[j]))
    new_dom = ph.substitute(red.body_domain, new_names, forms)
    new_dom = ph.remove_redundancy(new_dom, n_min)
    new_body = ir.substitute_space(red.body, forms, new_names)

    n_ans = len(ans_cols)
    inner_proj = ir.AffineMap(tuple(unit(k) for k in range(n_ans + 1)))
    inner = ir.ReduceNode(red.op, inner_proj, new_dom, new_body)
    w_dom = ph.project(new_dom, list(range(n_ans + 1)))
    w_dom = ph.remove_redundancy(w_dom, n_min)
    w_name = program.fresh_name(f"{var}_in")
    decl = ir.VarDecl(w_name, "local", w_dom, program.decl(var).scalar)
    outer_proj = ir.AffineMap(
        tuple(
            ph.AffineForm(tuple(1 if j == k else 0 for j in range(n_ans + 1)), 0, 0)
            for k in range(n_ans)
        )
    )
    outer = ir.ReduceNode(
        red.op, outer_proj, w_dom, ir.VarRead(w_name, ir.AffineMap.identity(n_ans + 1))
    )
    prog = program.with_local(decl, inner, after=var).with_equation(var, outer)
    return prog.with_step(
        f"decompose {var} on {new_index.render(body_names, program.param_name)}"
    )


def _flatten_chain(e: ir.Expression, op: str) -> list[ir.Expression]:
    if isinstance(e, ir.BinaryOp) and e.op == op:
        return _flatten_chain(e.lhs, op) + _flatten_chain(e.rhs, op)
    return [e]


def _expr_rows(e: ir.Expression) -> list[ph.AffineForm]:
    rows = []
    for node in ir.walk(e):
        if isinstance(node, ir.VarRead):
            rows.extend(node.access.rows)
        elif isinstance(node, ir.Case):
            for g, _ in node.branches:
                rows.extend(c.form for c in g.constraints)
    return rows


def _invariant_over(e: ir.Expression, proj: ir.AffineMap) -> bool:
    proj_rows = [list(r.coeffs) for r in proj.rows]
    return all(in_row_space(proj_rows, list(r.coeffs)) for r in _expr_rows(e))


def _to_answer_space(e: ir.Expression, red: ir.ReduceNode, ans_names) -> Optional[ir.Expression]:
    """Rewrite a body subexpression invariant over the accumulation as an
    expression over the answer indices."""
    m = len(red.projection.rows)

    def conv_form(g: ph.AffineForm) -> Optional[ph.AffineForm]:
        mt = RatMatrix.from_rows(
            [[row.coeffs[j] for row in red.projection.rows] for j in range(len(g.coeffs))]
        )
        lam = solve_rational(mt, list(g.coeffs))
        if lam is None or any(x.denominator != 1 for x in lam):
            return None
        lam_i = [int(x) for x in lam]
        par = g.param - sum(l * row.param for l, row in zip(lam_i, red.projection.rows))
        cst = g.const - sum(l * row.const for l, row in zip(lam_i, red.projection.rows))
        return ph.AffineForm(tuple(lam_i), par, cst)

    def conv(node: ir.Expression) -> Optional[ir.Expression]:
        if isinstance(node, ir.Const):
            return node
        if isinstance(node, ir.VarRead):
            rows = [conv_form(r) for r in node.access.rows]
            if any(r is None for r in rows):
                return None
            return ir.VarRead(node.name, ir.AffineMap(tuple(rows)))
        if isinstance(node, ir.BinaryOp):
            a, b = conv(node.lhs), conv(node.rhs)
            if a is None or b is None:
                return None
            return ir.BinaryOp(node.op, a, b)
        if isinstance(node, ir.Case):
            out = []
            for g, sub in node.branches:
                forms = [conv_form(c.form) for c in g.constraints]
                se = conv(sub)
                if se is None or any(f is None for f in forms):
                    return None
                gg = ph.ParamPolyhedron(
                    tuple(ans_names),
                    tuple(ph.Constraint(f, c.kind) for f, c in zip(forms, g.constraints)),
                    g.param_name,
                )
                out.append((gg, se))
            return ir.Case(tuple(out))
        return None

    return conv(e)


def factor_invariant(program: ir.Program, var: str, n_min: int = ph.DEFAULT_N_MIN) -> ir.Program:
    """Pull a subterm invariant over the accumulation out of the reduction;
    the remaining reduction is hoisted to a fresh local variable."""
    red = program.equation(var)
    if not isinstance(red, ir.ReduceNode):
        raise Degenerate(f"{var} is not defined by a bare reduction")
    body = red.body
    if not isinstance(body, ir.BinaryOp):
        raise NotDistributive("reduction body is not a binary operation")
    bop = body.op
    if red.op not in DISTRIB_TABLE.get(bop, ()):
        raise NotDistributive(f"{bop} does not distribute over {red.op}")
    operands = _flatten_chain(body, bop)
    inv = [e for e in operands if _invariant_over(e, red.projection)]
    rest = [e for e in operands if not _invariant_over(e, red.projection)]
    if not inv:
        raise NotInvariant("no operand is invariant over the accumulation")
    if not rest:
        raise NotInvariant("every operand is invariant; nothing to reduce")
    ans_names = program.decl(var).domain.index_names
    inv_expr = inv[0]
    for e in inv[1:]:
        inv_expr = ir.BinaryOp(bop, inv_expr, e)
    inv_ans = _to_answer_space(inv_expr, red, ans_names)
    if inv_ans is None:
        raise NotInvariant("invariant operand is not integrally expressible over answers")
    rest_expr = rest[0]
    for e in rest[1:]:
        rest_expr = ir.BinaryOp(bop, rest_expr, e)

    # compress the hoisted variable onto the answer dimensions it uses
    sel = red.projection.coordinate_selection()
    if sel is None:
        raise Degenerate("reduction projection must select coordinates")
    d = red.body_domain.dim_index
    locals_ = [j for j in range(d) if j not in sel]
    used_cols = set()
    for r in _expr_rows(rest_expr):
        for j, c in enumerate(r.coeffs):
            if c != 0 and j in sel:
                used_cols.add(j)
    changed = True
    kept_cons = []
    while changed:
        changed = False
        kept_cons = []
        for c in red.body_domain.constraints:
            touch_local = any(c.form.coeffs[j] for j in locals_)
            touch_used = any(c.form.coeffs[j] for j in used_cols)
            if touch_local or touch_used:
                kept_cons.append(c)
                for j, x in enumerate(c.form.coeffs):
                    if x != 0 and j in sel and j not in used_cols:
                        used_cols.add(j)
                        changed = True
    keep = sorted(used_cols) + locals_
    z_names = tuple(red.body_domain.index_names[j] for j in keep)
    colmap = {j: k for k, j in enumerate(keep)}
    z_cons = []
    for c in kept_cons:
        z_cons.append(
            ph.Constraint(
                ph.AffineForm(
                    tuple(c.form.coeffs[j] for j in keep), c.form.param, c.form.const
                ),
                c.kind,
            )
        )
    z_dom = ph.ParamPolyhedron(z_names, tuple(z_cons), red.body_domain.param_name)
    width = len(keep)
    narrow_forms = []
    for j in range(d):
        if j in colmap:
            narrow_forms.append(
                ph.AffineForm(tuple(1 if k == colmap[j] else 0 for k in range(width)), 0, 0)
            )
        else:
            narrow_forms.append(None)
    # rest expression must not mention dropped columns
    for r in _expr_rows(rest_expr):
        for j, c in enumerate(r.coeffs):
            if c != 0 and narrow_forms[j] is None:
                raise NotInvariant("residual body mentions a dropped answer index")
    filled = [
        f if f is not None else ph.AffineForm((0,) * width, 0, 0) for f in narrow_forms
    ]
    z_body = ir.substitute_space(rest_expr, filled, z_names)
    n_used = len(used_cols)
    z_proj = ir.AffineMap(
        tuple(
            ph.AffineForm(tuple(1 if k == i else 0 for k in range(width)), 0, 0)
            for i in range(n_used)
        )
    )
    z_ans_dom = ph.remove_redundancy(ph.project(z_dom, list(range(n_used))), n_min)
    z_name = program.fresh_name(f"{var}_f")
    z_decl = ir.VarDecl(z_name, "local", z_ans_dom, program.decl(var).scalar)
    z_node = ir.ReduceNode(red.op, z_proj, z_dom, z_body)
    # read of the compressed variable from the enclosing answer space
    used_sel = sorted(used_cols)
    sel_pos = {j: r for r, j in enumerate(sel)}
    read_rows = tuple(
        ph.AffineForm(
            tuple(1 if k == sel_pos[j] else 0 for k in range(len(sel))), 0, 0
        )
        for j in used_sel
    )
    z_read = ir.VarRead(z_name, ir.AffineMap(read_rows))
    new_expr = ir.BinaryOp(bop, inv_ans, z_read)
    prog = program.with_local(z_decl, z_node, after=var).with_equation(var, new_expr)
    return prog.with_step(f"factor invariant term out of {var}")


DISTRIB_TABLE = {
    "*": {"+"},
    "+": {"min", "max"},
}


# ---------------------------------------------------------------------------
# Exhaustive variant search


def _sites(p: ir.Program) -> list[tuple[str, tuple, ir.ReduceNode]]:
    out = []

    def walk_path(e, path, var):
        if isinstance(e, ir.ReduceNode):
            out.append((var, tuple(path), e))
            return
        if isinstance(e, ir.BinaryOp):
            walk_path(e.lhs, path + [("b", 0)], var)
            walk_path(e.rhs, path + [("b", 1)], var)
        elif isinstance(e, ir.Case):
            for i, (_, sub) in enumerate(e.branches):
                walk_path(sub, path + [("c", i)], var)

    for n, e in p.equations:
        walk_path(e, [], n)
    return out


def _get_node(e: ir.Expression, path: tuple) -> ir.Expression:
    for kind, i in path:
        if kind == "b":
            e = e.lhs if i == 0 else e.rhs
        else:
            e = e.branches[i][1]
    return e


def _replace_node(e: ir.Expression, path: tuple, new: ir.Expression) -> ir.Expression:
    if not path:
        return new
    (kind, i), rest = path[0], path[1:]
    if kind == "b":
        if i == 0:
            return ir.BinaryOp(e.op, _replace_node(e.lhs, rest, new), e.rhs)
        return ir.BinaryOp(e.op, e.lhs, _replace_node(e.rhs, rest, new))
    branches = list(e.branches)
    g, sub = branches[i]
    branches[i] = (g, _replace_node(sub, rest, new))
    return ir.Case(tuple(branches))


def _path_guards(e: ir.Expression, path: tuple) -> list[ph.Constraint]:
    out = []
    for kind, i in path:
        if kind == "c":
            out.extend(e.branches[i][0].constraints)
            e = e.branches[i][1]
        else:
            e = e.lhs if i == 0 else e.rhs
    return out


def hoist_site(
    program: ir.Program, var: str, path: tuple, n_min: int = ph.DEFAULT_N_MIN
) -> tuple[ir.Program, str]:
    """Move a nested reduction into its own local variable so that recurrence
    rewrites have an equation to target."""
    if not path:
        return program, var
    eq = program.equation(var)
    node = _get_node(eq, path)
    assert isinstance(node, ir.ReduceNode)
    a_dom = program.decl(var).domain
    ans_names = a_dom.index_names
    guards = _path_guards(eq, path)
    # domain is the region where the site is read; where the body has no
    # points the value is the operator identity
    vdom = ph.remove_redundancy(a_dom.with_constraints(guards), n_min)
    name = program.fresh_name(f"{var}_r")
    decl = ir.VarDecl(name, "local", vdom, program.decl(var).scalar)
    read = ir.VarRead(name, ir.AffineMap.identity(len(ans_names)))
    prog = program.with_local(decl, node, after=var)
    prog = prog.with_equation(var, _replace_node(eq, path, read))
    return prog, name


def _acc_dim(red: ir.ReduceNode, n_min: int) -> int:
    dom = ph.remove_redundancy(red.body_domain, n_min)
    if ph.is_empty(dom, n_min):
        return 0
    names = tuple(f"__a{i}" for i in range(red.projection.arity_out))
    img = image_of(dom, red.projection, names)
    return ph.dimension(dom, n_min) - ph.dimension(img, n_min)


def _site_children(
    program: ir.Program, var: str, path: tuple, red: ir.ReduceNode, n_min: int
) -> tuple[list[ir.Program], bool]:
    """Successor programs from one reduction site.  Second result reports a
    stuck site: reuse remains but no move can exploit or expose it."""
    from .normalize import normalize

    if ph.is_empty(red.body_domain, n_min):
        return [], False
    reuse = reduction_reuse(red, n_min)
    children: list[ir.Program] = []
    needs_inverse_seen = False
    if reuse.dim >= 1:
        dnr = ph.remove_redundancy(red.body_domain, n_min)
        if ph.dimension(dnr, n_min) >= 1:
            lat = fl.build_face_lattice(dnr, n_min)
            try:
                labelings = enumerate_labelings(lat.root, reuse, lat)
            except NoReuse:
                labelings = []
            for lab in labelings:
                try:
                    select_rho(lab)
                    prog, v = hoist_site(program, var, path, n_min)
                    child = single_step_simplify(prog, v, lab, n_min)
                except NeedsInverse:
                    needs_inverse_seen = True
                    continue
                except (Degenerate, RadiusExhausted):
                    continue
                children.append(normalize(child, n_min))
            if children:
                return children, False
        # Reuse remains but every labeling is a self-shift (the reuse lies in
        # the accumulation space): no move of ours can exploit it.  Only a
        # missing-inverse obstruction is fixable by exposing transformations.
        if not needs_inverse_seen:
            return [], True
    expose: list[ir.Program] = []
    try:
        prog, v = hoist_site(program, var, path, n_min)
        expose.append(normalize(factor_invariant(prog, v, n_min), n_min))
    except (NotDistributive, NotInvariant, Degenerate):
        pass
    try:
        locals_ = _local_columns(red)
    except Degenerate:
        locals_ = []
    if len(locals_) >= 2 and _acc_dim(red, n_min) >= 2:
        for cand in propose_decompositions(red):
            try:
                prog, v = hoist_site(program, var, path, n_min)
                expose.append(normalize(decompose(prog, v, cand, n_min), n_min))
            except (DependentIndex, Degenerate):
                continue
    if expose:
        return expose, False
    return [], reuse.dim >= 1


def simplify_all(
    program: ir.Program,
    budget_nodes: int = 20000,
    budget_seconds: float = 300.0,
    n_min: int = ph.DEFAULT_N_MIN,
    first_only: bool = False,
) -> SearchResult:
    """Exhaustive search over single-step simplifications, decompositions and
    distributivity factorings.  A variant is recorded for every reachable
    program in which no reduction retains exploitable reuse and whose
    operation-count degree is strictly below the original's."""
    from .normalize import normalize

    p0 = normalize(program, n_min)
    orig = counting.program_ops(p0)
    result = SearchResult([], False, 0, orig.degree)
    visited: set[str] = set()
    found: dict[str, Variant] = {}
    t0 = time.monotonic()

    def dfs(p: ir.Program):
        if result.budget_exceeded or (first_only and found):
            return
        if result.explored >= budget_nodes or time.monotonic() - t0 > budget_seconds:
            result.budget_exceeded = True
            return
        key = p.canonical_text()
        if key in visited:
            return
        visited.add(key)
        result.explored += 1
        # moves on distinct sites commute, so branching only on the first
        # active site explores every leaf exactly once
        children: list[ir.Program] = []
        for var, path, red in _sites(p):
            kids, stuck = _site_children(p, var, path, red, n_min)
            if stuck:
                return  # dead branch: unexploitable reuse remains
            if kids and not children:
                children = kids
        if not children:
            rep = counting.program_ops(p)
            if rep.degree < orig.degree and key not in found:
                found[key] = Variant(p, p.provenance, rep.total, rep.degree)
            return
        for child in children:
            dfs(child)

    dfs(p0)
    result.variants = list(found.values())
    return result
