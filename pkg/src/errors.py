"""
Exception hierarchy shared by every module.

InputError subclasses are contract violations on the caller's side (exit code 2
from the CLI); everything else deriving from NonabcohError is a domain failure
(exit code 1).
"""


class NonabcohError(Exception):
    """Base class for all toolkit errors."""


class InputError(NonabcohError):
    """Malformed or out-of-contract input."""


# ============================================================
# numkit
# ============================================================
class DimensionTooLarge(InputError):
    pass


class ModeMismatch(InputError):
    pass


class SingularMatrix(NonabcohError):
    pass


class SchemaError(InputError):
    pass


class DimensionMismatch(SchemaError):
    """Non-square matrix where a square one is required, or incompatible shapes."""


# ============================================================
# betti
# ============================================================
class InvalidGenus(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class RelationViolation(NonabcohError):
    pass


# ============================================================
# cech
# ============================================================
class CoverNotDeclaredGood(InputError):
    pass


class RankMismatch(NonabcohError):
    pass


class NotClosed(NonabcohError):
    pass


class NotCocycle(NonabcohError):
    pass


# ============================================================
# localsys
# ============================================================
class MissingEdge(InputError):
    pass


class Disconnected(InputError):
    pass


class InvalidCocycle(NonabcohError):
    pass


class PresentationMismatch(InputError):
    pass


class NotAbelian(NonabcohError):
    pass


# ============================================================
# lattice
# ============================================================
class DegreeTooHigh(InputError):
    pass


class BrokenPath(InputError):
    pass


class NotFlat(NonabcohError):
    pass


class RankNotOne(InputError):
    pass


# ============================================================
# fuchsian
# ============================================================
class PoleTooClose(NonabcohError):
    pass


class StepUnderflow(NonabcohError):
    pass


class ResonantSystem(NonabcohError):
    pass


class ZeroLambda(InputError):
    """λ = 0 is the Dolbeault degeneration, which has no numeric counterpart here."""


# ============================================================
# equivalences
# ============================================================
class GenusMismatch(InputError):
    pass


class ComplexMismatch(InputError):
    pass
