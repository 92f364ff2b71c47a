import pytest

from redsimpl import facelattice as fl
from redsimpl import polyhedron as ph
from redsimpl.errors import EmptyDomain, NotAChild

D1 = ph.parse_set("{[i,j] : 0 <= i and i < N and 0 <= j and j < N}")
D2 = ph.parse_set("{[i,j] : 0 <= i and i < 10 and 0 <= j and j < N}")
TRI = ph.parse_set("{[i,j] : 0 <= j and j <= i and i < N}")


def test_square_lattice_face_counts():
    lat = fl.build_face_lattice(D1)
    assert lat.face_count() == 9
    assert {d: len(v) for d, v in lat.levels.items()} == {2: 1, 1: 4, 0: 4}
    assert len(fl.facets(lat, lat.root)) == 4


def test_thick_segment():
    lat = fl.build_face_lattice(D2)
    assert lat.root.dim == 1
    kids = fl.facets(lat, lat.root)
    assert len(kids) == 2 and all(f.dim == 0 for f in kids)
    # the i-bounds are effectively saturated and never offered for saturation
    sat_dirs = {D2.constraints[i].form.coeffs for i in lat.presaturated}
    assert sat_dirs == {(1, 0), (-1, 0)}


def test_tetrahedron_has_four_facets():
    tetra = ph.remove_redundancy(
        ph.parse_set("{[i,j,k] : 0 <= i and i <= N and 0 <= j and k <= i - j and 0 <= k}")
    )
    lat = fl.build_face_lattice(tetra)
    assert len(fl.facets(lat, lat.root)) == 4


def test_triangle_facets_derived_by_saturation():
    # oracle: saturate each constraint independently and keep the non-empty ones
    expected = sum(
        0 if ph.is_empty(ph.saturate(TRI, i)) else 1 for i in range(len(TRI.constraints))
    )
    lat = fl.build_face_lattice(TRI)
    assert len(fl.facets(lat, lat.root)) == expected == 3


def test_facet_normals():
    lat = fl.build_face_lattice(TRI)
    normals = {fl.facet_normal(f, lat.root) for f in fl.facets(lat, lat.root)}
    assert normals == {(0, 1), (1, -1), (-1, 0)}
    vertex = next(f for f in lat.all_faces() if f.dim == 0)
    assert fl.facets(lat, vertex) == []
    with pytest.raises(NotAChild):
        fl.facet_normal(lat.root, lat.root)


def test_no_empty_faces_stored():
    lat = fl.build_face_lattice(D1)
    for f in lat.all_faces():
        assert not ph.is_empty(f.geometry)


def test_children_extend_parent_by_one():
    lat = fl.build_face_lattice(D1)
    for parent, kids in lat.children.items():
        for child in kids:
            extra = child.saturation_set - parent
            assert len(extra) == 1


def test_empty_domain_rejected():
    with pytest.raises(EmptyDomain):
        fl.build_face_lattice(ph.parse_set("{[i] : i >= 1 and i <= 0}"))


def test_facets_rejects_foreign_face():
    lat = fl.build_face_lattice(D1)
    other = fl.build_face_lattice(TRI)
    import pytest as _pytest
    from redsimpl.errors import NotInLattice

    foreign = next(f for f in other.all_faces() if f.dim == 1)
    with _pytest.raises(NotInLattice):
        fl.facets(lat, foreign)
