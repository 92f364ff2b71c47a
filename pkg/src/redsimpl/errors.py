"""Error types shared across the package.

Every error carries a stable machine-readable code so the CLI can map
failures onto exit codes and JSON diagnostics.
"""

from __future__ import annotations


class RedsimplError(Exception):
    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class EmptyDomain(RedsimplError):
    code = "EMPTY_DOMAIN"


class OutOfRange(RedsimplError):
    code = "OUT_OF_RANGE"


class DimensionMismatch(RedsimplError):
    code = "DIMENSION_MISMATCH"


class Unbounded(RedsimplError):
    code = "UNBOUNDED"


class RadiusExhausted(RedsimplError):
    code = "RADIUS_EXHAUSTED"


class NotInLattice(RedsimplError):
    code = "NOT_IN_LATTICE"


class NotAChild(RedsimplError):
    code = "NOT_A_CHILD"


class NonAffineAccess(RedsimplError):
    code = "NON_AFFINE_ACCESS"


class RecursiveDefinition(RedsimplError):
    code = "RECURSIVE_DEFINITION"


class SyntaxErrorDiag(RedsimplError):
    code = "SYNTAX_ERROR"


class NoReuse(RedsimplError):
    code = "NO_REUSE"


class NeedsInverse(RedsimplError):
    code = "NEEDS_INVERSE"


class Degenerate(RedsimplError):
    code = "DEGENERATE"


class DependentIndex(RedsimplError):
    code = "DEPENDENT_INDEX"


class NotDistributive(RedsimplError):
    code = "NOT_DISTRIBUTIVE"


class NotInvariant(RedsimplError):
    code = "NOT_INVARIANT"


class BudgetExceeded(RedsimplError):
    code = "BUDGET_EXCEEDED"


class FitMismatch(RedsimplError):
    code = "FIT_MISMATCH"


class InsufficientSamples(RedsimplError):
    code = "INSUFFICIENT_SAMPLES"


class EvalCycle(RedsimplError):
    code = "CYCLE"


class DomainHole(RedsimplError):
    code = "DOMAIN_HOLE"


class UnboundInput(RedsimplError):
    code = "UNBOUND_INPUT"


class SignatureMismatch(RedsimplError):
    code = "SIGNATURE_MISMATCH"


class UnsupportedScalar(RedsimplError):
    code = "UNSUPPORTED_SCALAR"


class EmptyReduction(RedsimplError):
    code = "EMPTY_REDUCTION"
