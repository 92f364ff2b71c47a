from fractions import Fraction
from pathlib import Path

import pytest

from redsimpl import counting, frontend
from redsimpl import polyhedron as ph
from redsimpl.counting import QuasiPolynomial
from redsimpl.errors import InsufficientSamples

CORPUS = Path(__file__).resolve().parents[1] / "src" / "redsimpl" / "corpus"


def test_cardinality_square_and_thick():
    d1 = ph.parse_set("{[i,j] : 0 <= i and i < N and 0 <= j and j < N}")
    d2 = ph.parse_set("{[i,j] : 0 <= i and i < 10 and 0 <= j and j < N}")
    assert counting.cardinality(d1) == QuasiPolynomial.from_poly([0, 0, 1])
    assert counting.cardinality(d2) == QuasiPolynomial.from_poly([0, 10])


def test_cardinality_triangle():
    tri = ph.parse_set("{[i,j] : 0 <= j and j <= i and i < N}")
    assert counting.cardinality(tri) == QuasiPolynomial.from_poly(
        [0, Fraction(1, 2), Fraction(1, 2)]
    )


def test_cardinality_matches_enumeration_on_heldout():
    sets = [
        "{[i,j] : 0 <= j and j <= i and i < N}",
        "{[i,j,k] : 0 <= i and i <= N and 0 <= j and 0 <= k and k <= i - j}",
        "{[i,j] : 0 <= i and i < 10 and 0 <= j and j < N}",
    ]
    for text in sets:
        p = ph.parse_set(text)
        q = counting.cardinality(p)
        for n in (25, 26, 31):  # far beyond the fit window
            assert q.eval(n) == len(ph.enumerate_points(p, n))


def test_period_two_set():
    # points with even coordinate sum in a segment: genuinely periodic count
    p = ph.parse_set("{[i,j] : 0 <= i and i < N and 2*j = i}")
    q = counting.cardinality(p)
    for n in (20, 21, 27):
        assert q.eval(n) == len(ph.enumerate_points(p, n))


def test_program_ops_rna_degree_and_leading():
    prog = frontend.parse((CORPUS / "rna_iloops.red").read_text())
    rep = counting.program_ops(prog)
    assert rep.degree == 4
    assert rep.total.leading() == Fraction(1, 24)


def test_program_ops_prefix():
    prog = frontend.parse((CORPUS / "prefix_sum.red").read_text())
    rep = counting.program_ops(prog)
    assert rep.degree == 2
    assert rep.total.leading() == Fraction(1, 2)


def test_measured_degree():
    assert abs(counting.measured_degree([(n, n**3) for n in (8, 16, 32, 64)]) - 3.0) < 0.01
    samples = [(n, n**4 / 24 + n**3 / 12) for n in (100, 200, 400, 800, 1600, 3000)]
    assert abs(counting.measured_degree(samples) - 4.0) < 0.05
    with pytest.raises(InsufficientSamples):
        counting.measured_degree([(2, 4), (3, 9), (4, 16)])
    with pytest.raises(InsufficientSamples):
        counting.measured_degree([(2, 4), (3, 9), (3, 9), (4, 16)])


def test_quasipolynomial_arithmetic_exact():
    a = QuasiPolynomial.from_poly([1, Fraction(1, 3)])
    b = QuasiPolynomial(2, ((Fraction(0), Fraction(2)), (Fraction(1), Fraction(2))))
    s = a.add(b)
    for n in range(1, 9):
        assert s.eval(n) == a.eval(n) + b.eval(n)
    assert s.degree == 1


def test_quasipolynomial_render_periodic():
    q = QuasiPolynomial(2, ((Fraction(1), Fraction(2)), (Fraction(0), Fraction(2))))
    text = q.render()
    assert "[N%2==0]" in text and "[N%2==1]" in text
    plain = QuasiPolynomial.from_poly([Fraction(1, 24), 0, 0, 0, Fraction(1, 24)])
    assert "N^4" in plain.render()
