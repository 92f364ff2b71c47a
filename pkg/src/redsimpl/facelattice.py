"""Face lattice of a parameterized polyhedron, with thick-face handling.

Faces are obtained by saturating inequality constraints of the root set.
Constraints that are effectively saturated already (equalities, or
inequalities confined to a parameter-free constant width) are pre-saturated
at the root and never offered for further saturation, so a thick set such
as {[i,j] : 0 <= i < 10 and 0 <= j < N} has a 1-dimensional root whose only
facets are the two endpoints in j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import polyhedron as ph
from .errors import EmptyDomain, NotAChild, NotInLattice
from .linalg import IntVector


@dataclass(frozen=True)
class Face:
    saturation_set: frozenset[int]
    geometry: ph.ParamPolyhedron
    dim: int


@dataclass
class FaceLattice:
    root_poly: ph.ParamPolyhedron
    root: Face
    levels: dict[int, list[Face]]
    children: dict[frozenset, list[Face]] = field(default_factory=dict)
    presaturated: frozenset[int] = frozenset()

    def all_faces(self) -> list[Face]:
        out = []
        for d in sorted(self.levels, reverse=True):
            out.extend(self.levels[d])
        return out

    def face_count(self) -> int:
        return sum(len(v) for v in self.levels.values())


def _geometry(root: ph.ParamPolyhedron, sat: frozenset[int]) -> ph.ParamPolyhedron:
    cons = []
    for i, c in enumerate(root.constraints):
        cons.append(ph.Constraint(c.form, ph.EQ) if i in sat else c)
    return ph.ParamPolyhedron(root.index_names, tuple(cons), root.param_name)


def build_face_lattice(p: ph.ParamPolyhedron, n_min: int = ph.DEFAULT_N_MIN) -> FaceLattice:
    """Complete face lattice of p (constraints should be non-redundant)."""
    if ph.is_empty(p, n_min):
        raise EmptyDomain("cannot build the face lattice of an empty set")
    pre = frozenset(
        i
        for i, c in enumerate(p.constraints)
        if c.kind == ph.EQ or i in ph.constant_width_ge_indices(p, n_min)
    )
    candidates = [i for i in range(len(p.constraints)) if i not in pre]
    root = Face(frozenset(), p, ph.dimension(p, n_min))
    faces: dict[frozenset, Face] = {root.saturation_set: root}
    geom_seen: dict[str, frozenset] = {p.render_sorted(): root.saturation_set}
    children: dict[frozenset, list[Face]] = {root.saturation_set: []}
    frontier = [root]
    while frontier:
        nxt = []
        for face in frontier:
            for i in candidates:
                if i in face.saturation_set:
                    continue
                sat = face.saturation_set | {i}
                if sat in faces:
                    child = faces[sat]
                    if child not in children[face.saturation_set]:
                        children[face.saturation_set].append(child)
                    continue
                geom = _geometry(p, sat)
                if ph.is_empty(geom, n_min):
                    continue
                key = geom.render_sorted()
                if key in geom_seen:
                    child = faces[geom_seen[key]]
                    if child not in children[face.saturation_set]:
                        children[face.saturation_set].append(child)
                    continue
                child = Face(sat, geom, ph.dimension(geom, n_min))
                faces[sat] = child
                geom_seen[key] = sat
                children[sat] = []
                children[face.saturation_set].append(child)
                nxt.append(child)
        frontier = nxt
    levels: dict[int, list[Face]] = {}
    for f in faces.values():
        levels.setdefault(f.dim, []).append(f)
    for d in levels:
        levels[d].sort(key=lambda f: sorted(f.saturation_set))
    lat = FaceLattice(p, root, levels, children, pre)
    return lat


def facets(lat: FaceLattice, f: Face) -> list[Face]:
    """Immediate children of f: faces saturating one extra constraint whose
    dimension is exactly one less."""
    if f.saturation_set not in lat.children or f not in lat.levels.get(f.dim, []):
        raise NotInLattice("face does not belong to this lattice")
    return [c for c in lat.children[f.saturation_set] if c.dim == f.dim - 1]


def facet_normal(f: Face, parent: Face) -> IntVector:
    """Linear index part of the constraint newly saturated by f, in the
    inward orientation in which the inequality was written (form >= 0)."""
    extra = f.saturation_set - parent.saturation_set
    if len(extra) != 1 or not f.saturation_set > parent.saturation_set:
        raise NotAChild("face does not saturate exactly one extra constraint of parent")
    (i,) = extra
    return parent.geometry.constraints[i].form.coeffs



def lattice_as_dict(lat: FaceLattice) -> dict:
    def node(f: Face) -> dict:
        return {
            "saturation_set": sorted(f.saturation_set),
            "dim": f.dim,
            "constraints": [
                c.render(f.geometry.index_names, f.geometry.param_name)
                for c in f.geometry.constraints
            ],
            "children": [node(c) for c in lat.children.get(f.saturation_set, [])],
        }

    return {
        "set": lat.root_poly.render(),
        "presaturated": sorted(lat.presaturated),
        "face_count": lat.face_count(),
        "root": node(lat.root),
    }


def lattice_as_text(lat: FaceLattice) -> str:
    lines = [f"face lattice of {lat.root_poly.render()}"]
    if lat.presaturated:
        lines.append(f"  effectively saturated at root: {sorted(lat.presaturated)}")

    def walk(f: Face, depth: int, seen: set):
        tag = "{%s}" % ",".join(str(i) for i in sorted(f.saturation_set))
        lines.append("  " * (depth + 1) + f"{tag} dim={f.dim} {f.geometry.render()}")
        if f.saturation_set in seen:
            return
        seen.add(f.saturation_set)
        for c in lat.children.get(f.saturation_set, []):
            walk(c, depth + 1, seen)

    walk(lat.root, 0, set())
    return "\n".join(lines)
