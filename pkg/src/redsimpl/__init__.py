"""redsimpl: a push-button simplifier for polyhedral reductions.

Takes equational programs whose reductions carry reuse (the same value
contributing to many answers) and rewrites them as recurrences plus
residual boundary work, lowering asymptotic complexity by whole polynomial
degrees.  Ships with exact operation counting, a demand-driven interpreter
for verification, and a C backend.
"""

from .counting import ComplexityReport, QuasiPolynomial, cardinality, measured_degree, program_ops
from .facelattice import Face, FaceLattice, build_face_lattice, facet_normal, facets
from .frontend import parse, print_program
from .interp import EvalSession, VerifyReport, evaluate, op_profile, verify_equivalence
from .ir import Program, dependence_map, substitute_definition, validate
from .normalize import normalize
from .polyhedron import (
    ParamPolyhedron,
    dimension,
    enumerate_points,
    is_empty,
    parse_set,
    saturate,
    smallest_point,
    translate,
)
from .simplify import (
    Labeling,
    ReuseSpace,
    SearchResult,
    Variant,
    decompose,
    enumerate_labelings,
    factor_invariant,
    propose_decompositions,
    select_rho,
    simplify_all,
    single_step_simplify,
)

__version__ = "0.1.0"
