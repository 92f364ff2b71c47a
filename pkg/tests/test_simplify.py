from pathlib import Path

import pytest

from redsimpl import facelattice as fl
from redsimpl import frontend, interp, ir, simplify
from redsimpl import polyhedron as ph
from redsimpl.errors import DependentIndex, NeedsInverse, NotDistributive, NotInvariant
from redsimpl.linalg import ivec_dot, ivec_primitive
from redsimpl.simplify import MINUS, PLUS, ZERO

CORPUS = Path(__file__).resolve().parents[1] / "src" / "redsimpl" / "corpus"


def load(name):
    return frontend.parse((CORPUS / name).read_text())


def tetra_labelings():
    p = load("double_scan.red")
    red = p.equation("Y")
    reuse = simplify.reduction_reuse(red)
    dom = ph.remove_redundancy(red.body_domain)
    lat = fl.build_face_lattice(dom)
    labs = simplify.enumerate_labelings(lat.root, reuse, lat)
    # keyed by primitive facet normal for stable lookup
    keyed = []
    for lab in labs:
        by_normal = {dom.constraints[i].form.coeffs: s for i, s in lab.assignment}
        keyed.append((by_normal, lab))
    return keyed


def test_tetrahedron_has_twelve_labelings():
    keyed = tetra_labelings()
    assert len(keyed) == 12
    # the facet in the reuse plane is always the no-contribution label
    for by_normal, _ in keyed:
        assert by_normal[(0, 0, 1)] == ZERO


def test_triangle_has_two_labelings():
    p = load("prefix_sum.red")
    red = p.equation("Y")
    reuse = simplify.reduction_reuse(red)
    lat = fl.build_face_lattice(ph.remove_redundancy(red.body_domain))
    labs = simplify.enumerate_labelings(lat.root, reuse, lat)
    assert len(labs) == 2
    # the diagonal facet is parallel to the reuse and stays unlabeled
    for lab in labs:
        normals = {lat.root_poly.constraints[i].form.coeffs: s for i, s in lab.assignment}
        assert normals[(1, -1)] == ZERO


def find_class(keyed, want):
    for by_normal, lab in keyed:
        if all(by_normal[n] == s for n, s in want.items()):
            return lab
    raise AssertionError(f"no labeling with signs {want}")


def test_select_rho_worked_classes():
    keyed = tetra_labelings()
    # signs over facets keyed by inward normal: N-i -> (-1,0,0), j -> (0,1,0),
    # diagonal i-j-k -> (1,-1,-1)
    r_a = find_class(keyed, {(-1, 0, 0): ZERO, (0, 1, 0): PLUS, (1, -1, -1): MINUS})
    r_b = find_class(keyed, {(-1, 0, 0): MINUS, (0, 1, 0): PLUS, (1, -1, -1): MINUS})
    r_l = find_class(keyed, {(-1, 0, 0): PLUS, (0, 1, 0): PLUS, (1, -1, -1): MINUS})
    assert simplify.select_rho(r_a) == (0, 1, 0)
    assert simplify.select_rho(r_b) == (1, 2, 0)
    assert simplify.select_rho(r_l) == (-1, 1, 0)


def test_rho_reproduces_labeling_signs():
    for by_normal, lab in tetra_labelings():
        rho = simplify.select_rho(lab)
        for normal, sign in by_normal.items():
            d = ivec_dot(normal, rho)
            assert (d > 0) == (sign == PLUS)
            assert (d < 0) == (sign == MINUS)
            assert (d == 0) == (sign == ZERO)


def test_single_step_produces_two_branch_recurrence():
    p = load("prefix_sum.red")
    red = p.equation("Y")
    reuse = simplify.reduction_reuse(red)
    lat = fl.build_face_lattice(ph.remove_redundancy(red.body_domain))
    labs = simplify.enumerate_labelings(lat.root, reuse, lat)
    fwd = next(l for l in labs if simplify.select_rho(l) == (1, 1))
    out = simplify.single_step_simplify(p, "Y", fwd)
    eq = out.equation("Y")
    assert isinstance(eq, ir.Case) and len(eq.branches) == 2
    base_guard, base_expr = eq.branches[0]
    int_guard, int_expr = eq.branches[1]
    assert any(c.kind == ph.EQ for c in base_guard.constraints)  # i = 0
    assert isinstance(base_expr, ir.VarRead) and base_expr.name == "X"
    assert base_expr.access.rows[0].coeffs == (1,) and base_expr.access.rows[0].const == 0
    assert isinstance(int_expr, ir.BinaryOp) and int_expr.op == "+"
    assert isinstance(int_expr.lhs, ir.VarRead) and int_expr.lhs.name == "Y"
    assert int_expr.lhs.access.rows[0].const == -1  # Y[i-1]
    assert isinstance(int_expr.rhs, ir.VarRead) and int_expr.rhs.name == "X"
    rep = interp.verify_equivalence(p, out, [1, 2, 5, 9], trials=2, seed=0)
    assert rep.passed


def test_needs_inverse_for_max_without_decomposition():
    p = load("decomp_max.red")
    red = p.equation("Y")
    reuse = simplify.reduction_reuse(red)
    lat = fl.build_face_lattice(ph.remove_redundancy(red.body_domain))
    labs = simplify.enumerate_labelings(lat.root, reuse, lat)
    assert labs  # at least one sign class exists
    for lab in labs:
        simplify.select_rho(lab)
        with pytest.raises(NeedsInverse):
            simplify.single_step_simplify(p, "Y", lab)


def test_explicit_decomposition_enables_the_recurrence():
    p = load("decomp_max.red")
    red = p.equation("Y")
    names = red.body_domain.index_names  # (i, j, k)
    m = ph.AffineForm((0, 1, 1), 0, 0)  # j + k
    p2 = simplify.decompose(p, "Y", m)
    res = simplify.simplify_all(p2, budget_seconds=120)
    assert len(res.variants) == 1
    v = res.variants[0]
    assert v.degree == 2
    rep = interp.verify_equivalence(p, v.program, [2, 4, 7], trials=2, seed=1)
    assert rep.passed


def test_decompose_rejects_answer_only_index():
    p = load("decomp_max.red")
    with pytest.raises(DependentIndex):
        simplify.decompose(p, "Y", ph.AffineForm((1, 0, 0), 0, 0))  # i alone


def test_propose_decompositions():
    p = load("distrib.red")
    red = p.equation("Y")
    cands = simplify.propose_decompositions(red)
    locs = {tuple(f.coeffs[1:]) for f in cands}
    assert (1, 1) in locs  # j + k: the reuse-exposing one
    p2 = load("rna_iloops.red")
    red2 = p2.equation("Y")
    cands2 = simplify.propose_decompositions(red2)
    locs2 = {ivec_primitive(f.coeffs[2:]) for f in cands2}
    assert (1, -1) in locs2  # the B subscript p - i + j - q
    assert (1, 1) in locs2  # the C subscript p - i - j + q
    # body reading only constants proposes nothing
    src = """param N;
output int Y : {[i] : 0 <= i and i < N};
Y[i] = reduce(+, [i,j]->[i], {[i,j] : 0 <= j and j <= i and i < N}, 1);
"""
    p3 = frontend.parse(src)
    empty = [
        f for f in simplify.propose_decompositions(p3.equation("Y"))
        if any(f.coeffs[1:])
    ]
    assert empty == []


def test_factor_invariant_requires_product_and_invariance():
    p = load("double_scan.red")
    with pytest.raises(NotDistributive):
        simplify.factor_invariant(p, "Y")  # body is a bare read
    src = """param N;
input int A : {[i] : 0 <= i and i <= N};
input int B : {[j] : 0 <= j and j <= N};
output int Y : {[i] : 0 <= i and i <= N};
Y[i] = reduce(min, [i,j]->[i], {[i,j] : 0 <= j and j <= i and i <= N}, A[j] * B[j]);
"""
    with pytest.raises(NotDistributive):
        simplify.factor_invariant(frontend.parse(src), "Y")  # * over min
    src2 = src.replace("min", "+").replace("A[j] * B[j]", "A[j] * B[j]")
    with pytest.raises(NotInvariant):
        simplify.factor_invariant(frontend.parse(src2), "Y")  # nothing invariant


def test_factor_invariant_pulls_answer_term():
    src = """param N;
input int A : {[i] : 0 <= i and i <= N};
input int B : {[j] : 0 <= j and j <= N};
output int Y : {[i] : 0 <= i and i <= N};
Y[i] = reduce(+, [i,j]->[i], {[i,j] : 0 <= j and j <= i and i <= N}, A[i] * B[j]);
"""
    p = frontend.parse(src)
    out = simplify.factor_invariant(p, "Y")
    eq = out.equation("Y")
    assert isinstance(eq, ir.BinaryOp) and eq.op == "*"
    rep = interp.verify_equivalence(p, out, [2, 4, 7], trials=2, seed=2)
    assert rep.passed


def test_search_determinism():
    p = load("double_scan.red")
    a = simplify.simplify_all(p, budget_seconds=120)
    b = simplify.simplify_all(p, budget_seconds=120)
    assert [v.program.canonical_text() for v in a.variants] == [
        v.program.canonical_text() for v in b.variants
    ]


def test_budget_flag():
    p = load("double_scan.red")
    res = simplify.simplify_all(p, budget_nodes=3)
    assert res.budget_exceeded


def test_division_inverse_behind_flag():
    from fractions import Fraction

    src = """param N;
input rat X : {[i] : 0 <= i and i < N};
output rat Y : {[i] : 0 <= i and i < N};
Y[i] = reduce(*, [i,j]->[i], {[i,j] : 0 <= j and j <= i and i < N}, X[i-j]);
"""
    p = frontend.parse(src)
    red = p.equation("Y")
    reuse = simplify.reduction_reuse(red)
    lat = fl.build_face_lattice(ph.remove_redundancy(red.body_domain))
    labs = simplify.enumerate_labelings(lat.root, reuse, lat)
    bwd = next(l for l in labs if simplify.select_rho(l) == (-1, -1))
    with pytest.raises(NeedsInverse):
        simplify.single_step_simplify(p, "Y", bwd)  # division stays off by default
    out = simplify.single_step_simplify(p, "Y", bwd, allow_division=True)
    n = 6
    inputs = {"X": {(i,): Fraction(i + 2, 3) for i in range(n)}}
    ref = interp.evaluate(p, inputs, n)["Y"]
    got = interp.evaluate(out, inputs, n)["Y"]
    assert got == ref
