"""
Finitely presented groups, their matrix representations, the conjugation action,
word traces and the rank ≤ 2 reductivity test.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import sympy

from src.errors import IndexOutOfRange, InvalidGenus, ModeMismatch, RelationViolation, SchemaError
from src.numkit import Matrix, Mode, eigenvalues, is_zero, reciprocal
from src.utils import DEFAULT_TOL

logger = logging.getLogger(__name__)


# ============================================================
# 1. WORDS AND PRESENTATIONS
# ============================================================
@dataclass(frozen=True)
class Word:
    """Product of generators; letters are (1-based generator index, ±1)."""

    letters: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        letters = tuple((int(g), int(s)) for g, s in self.letters)
        for g, s in letters:
            if s not in (1, -1):
                raise SchemaError(f"letter exponent must be ±1, got {s}")
            if g < 1:
                raise IndexOutOfRange(f"generator index must be ≥ 1, got {g}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def generator(cls, index: int, sign: int = 1) -> "Word":
        return cls(((index, sign),))

    @classmethod
    def from_json(cls, raw) -> "Word":
        try:
            return cls(tuple((g, s) for g, s in raw))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"word must be a list of [generator, ±1] pairs: {raw!r}") from exc

    def to_json(self) -> list[list[int]]:
        return [[g, s] for g, s in self.letters]

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -s) for g, s in reversed(self.letters)))

    def reduced(self) -> "Word":
        stack: list[tuple[int, int]] = []
        for g, s in self.letters:
            if stack and stack[-1] == (g, -s):
                stack.pop()
            else:
                stack.append((g, s))
        return Word(tuple(stack))

    def max_generator(self) -> int:
        return max((g for g, _ in self.letters), default=0)

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        return "".join(f"g{g}" + ("" if s > 0 else "⁻¹") for g, s in self.letters)


@dataclass(frozen=True)
class FpGroup:
    num_generators: int
    relators: tuple[Word, ...] = ()

    def __post_init__(self):
        if self.num_generators < 0:
            raise SchemaError("number of generators must be non-negative")
        relators = tuple(r if isinstance(r, Word) else Word.from_json(r) for r in self.relators)
        for index, relator in enumerate(relators):
            if relator.max_generator() > self.num_generators:
                raise IndexOutOfRange(
                    f"relator {index} uses generator {relator.max_generator()} "
                    f"but the group has {self.num_generators}"
                )
        object.__setattr__(self, "relators", relators)

    def same_presentation(self, other: "FpGroup") -> bool:
        """Equality up to free reduction of the relators (order preserved, empty relators ignored)."""
        if self.num_generators != other.num_generators:
            return False
        ours = [r.reduced() for r in self.relators if r.reduced().letters]
        theirs = [r.reduced() for r in other.relators if r.reduced().letters]
        return ours == theirs

    def to_json(self) -> dict:
        return {"generators": self.num_generators, "relators": [r.to_json() for r in self.relators]}


def surface_group(genus: int) -> FpGroup:
    """⟨A₁, B₁, …, A_g, B_g | Π [A_i, B_i]⟩ with A_i = 2i − 1 and B_i = 2i."""
    if genus < 1:
        raise InvalidGenus(f"genus must be ≥ 1, got {genus}")
    letters = []
    for i in range(1, genus + 1):
        a, b = 2 * i - 1, 2 * i
        letters += [(a, 1), (b, 1), (a, -1), (b, -1)]
    return FpGroup(2 * genus, (Word(tuple(letters)),))


# ============================================================
# 2. REPRESENTATIONS
# ============================================================
@dataclass(frozen=True)
class Representation:
    group: FpGroup
    images: tuple[Matrix, ...]
    _inverses: tuple[Matrix, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        images = tuple(self.images)
        if len(images) != self.group.num_generators:
            raise SchemaError(f"expected {self.group.num_generators} images, got {len(images)}")
        if images:
            modes = {m.mode for m in images}
            if len(modes) > 1:
                raise ModeMismatch("representation images mix exact and float matrices")
            sizes = {m.shape for m in images}
            if len(sizes) > 1 or images[0].shape[0] != images[0].shape[1]:
                raise SchemaError(f"images must be square of one size, got {sorted(sizes)}")
        object.__setattr__(self, "images", images)
        # raises SingularMatrix for a non-invertible image
        object.__setattr__(self, "_inverses", tuple(m.inverse() for m in images))

    @classmethod
    def trivial(cls, group: FpGroup, rank: int, mode: Mode = Mode.EXACT) -> "Representation":
        return cls(group, tuple(Matrix.identity(rank, mode) for _ in range(group.num_generators)))

    @property
    def rank(self) -> int:
        return self.images[0].shape[0] if self.images else 0

    @property
    def mode(self) -> Mode:
        return self.images[0].mode if self.images else Mode.EXACT

    def image(self, generator: int, sign: int = 1) -> Matrix:
        if not 1 <= generator <= len(self.images):
            raise IndexOutOfRange(f"generator {generator} outside 1..{len(self.images)}")
        return self.images[generator - 1] if sign > 0 else self._inverses[generator - 1]

    def to_json(self) -> dict:
        return {"rank": self.rank, "images": [m.to_json() for m in self.images]}


def evaluate_word(rep: Representation, word: Word, rank: Optional[int] = None) -> Matrix:
    """Ordered product of generator images (and inverses) along the word."""
    result = Matrix.identity(rank or rep.rank or 1, rep.mode)
    for g, s in word.letters:
        result = result @ rep.image(g, s)
    return result


def check_relations(rep: Representation, tol: float = DEFAULT_TOL) -> bool:
    return all(evaluate_word(rep, r).is_identity(tol) for r in rep.group.relators)


def validate(rep: Representation, tol: float = DEFAULT_TOL) -> Representation:
    for index, relator in enumerate(rep.group.relators):
        value = evaluate_word(rep, relator)
        if not value.is_identity(tol):
            gap = value.distance(Matrix.identity(rep.rank, rep.mode))
            raise RelationViolation(f"relator {index} ({relator}) evaluates {gap:.3e} away from identity")
    return rep


def conjugate(rep: Representation, g: Matrix) -> Representation:
    """(g, ρ) ↦ g ρ g⁻¹."""
    if g.shape != (rep.rank, rep.rank):
        raise SchemaError(f"conjugating matrix has shape {g.shape}, representation rank is {rep.rank}")
    g_inv = g.inverse()
    return Representation(rep.group, tuple(g @ m @ g_inv for m in rep.images))


def trace_invariants(rep: Representation, words) -> list:
    return [evaluate_word(rep, w).trace() for w in words]


# ============================================================
# 3. REDUCTIVITY
# ============================================================
class ReductivityStatus(str, Enum):
    REDUCTIVE = "reductive"
    NON_REDUCTIVE = "nonReductive"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ReductivityVerdict:
    """`witness` columns span invariant lines: one line for nonReductive, two for a split reductive rep."""

    status: ReductivityStatus
    reason: str
    witness: Optional[Matrix] = None

    def check(self, rep: Representation, tol: float = DEFAULT_TOL) -> bool:
        """Re-verify the witness lines by direct matrix action."""
        if self.witness is None:
            return self.status is not ReductivityStatus.NON_REDUCTIVE
        columns = [[self.witness[i, j] for i in range(self.witness.shape[0])] for j in range(self.witness.shape[1])]
        return all(_is_invariant_line(v, m, tol) for v in columns for m in rep.images)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "reason": self.reason,
            "witness": self.witness.to_json() if self.witness is not None else None,
        }


def _cross(v, w):
    return v[0] * w[1] - v[1] * w[0]


def _apply(m: Matrix, v):
    return (m[0, 0] * v[0] + m[0, 1] * v[1], m[1, 0] * v[0] + m[1, 1] * v[1])


def _is_invariant_line(v, m: Matrix, tol: float) -> bool:
    det = _cross(v, _apply(m, v))
    if m.mode is Mode.EXACT:
        return is_zero(det)
    scale = (abs(complex(v[0])) ** 2 + abs(complex(v[1])) ** 2) * (1.0 + m.distance(m.scale(0)))
    return abs(complex(det)) <= tol * scale


def _normalise(v):
    if isinstance(v[0], sympy.Basic) or isinstance(v[1], sympy.Basic):
        inv = reciprocal(v[0] if not is_zero(v[0]) else v[1])
        return tuple(sympy.expand(x * inv) for x in v)
    lead = v[0] if abs(complex(v[0])) >= abs(complex(v[1])) else v[1]
    inv = reciprocal(lead)
    return tuple(complex(x) * inv for x in v)


def _gaussian_eigenvalues(m: Matrix) -> Optional[list]:
    """Eigenvalues in ℚ(i), or None when the characteristic polynomial is irreducible there."""
    lam = sympy.Symbol("lam")
    poly = m.as_sympy().charpoly(lam).as_expr()
    _, factors = sympy.factor_list(poly, lam, extension=sympy.I)
    roots = []
    for factor, multiplicity in factors:
        coeffs = sympy.Poly(factor, lam).all_coeffs()
        if len(coeffs) != 2:
            return None
        roots.extend([sympy.expand(-coeffs[1] / coeffs[0])] * multiplicity)
    return roots


def _eigenlines(m: Matrix, values, tol: float) -> list:
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    exact = m.mode is Mode.EXACT
    lines = []
    for lam in values:
        if exact:
            use_b, use_c = not is_zero(b), not is_zero(c)
        else:
            use_b = abs(b) >= abs(c) and abs(b) > tol
            use_c = not use_b and abs(c) > tol
        if use_b:
            v = (b, lam - a)
        elif use_c:
            v = (lam - d, c)
        else:
            # diagonal and non-scalar: the eigenvalue picks a coordinate axis
            closer_to_a = is_zero(lam - a) if exact else abs(lam - a) <= abs(lam - d)
            v = (1, 0) if closer_to_a else (0, 1)
            if exact:
                v = (sympy.Integer(v[0]), sympy.Integer(v[1]))
        v = _normalise(v)
        if not any(_same_line(v, w, exact, tol) for w in lines):
            lines.append(v)
    return lines


def _same_line(v, w, exact: bool, tol: float) -> bool:
    det = _cross(v, w)
    return is_zero(det) if exact else abs(complex(det)) <= tol


def reductivity(rep: Representation, tol: float = DEFAULT_TOL) -> ReductivityVerdict:
    """Reductive iff every invariant subspace has an invariant complement; decided for rank ≤ 2."""
    if rep.rank <= 1:
        return ReductivityVerdict(ReductivityStatus.REDUCTIVE, "rank one: every representation is reductive")
    if rep.rank > 2:
        return ReductivityVerdict(ReductivityStatus.UNKNOWN, f"rank {rep.rank} is beyond the decided range")

    exact = rep.mode is Mode.EXACT
    pivot = next((m for m in rep.images if not m.is_scalar(tol)), None)
    if pivot is None:
        return ReductivityVerdict(
            ReductivityStatus.REDUCTIVE,
            "all images are scalar",
            Matrix.identity(2, rep.mode),
        )

    if exact:
        values = _gaussian_eigenvalues(pivot)
        if values is None:
            return ReductivityVerdict(
                ReductivityStatus.REDUCTIVE,
                "a non-scalar image has conjugate eigenvalues outside Q(i); its eigenlines are Galois "
                "conjugate, so either both or neither are common invariant lines",
            )
    else:
        values = eigenvalues(pivot, tol)

    candidates = _eigenlines(pivot, values, tol)
    common = [v for v in candidates if all(_is_invariant_line(v, m, tol) for m in rep.images)]
    logger.debug("reductivity: %d candidate lines, %d common", len(candidates), len(common))

    def as_witness(lines):
        return Matrix.from_rows([[v[0] for v in lines], [v[1] for v in lines]], rep.mode)

    if not common:
        return ReductivityVerdict(ReductivityStatus.REDUCTIVE, "irreducible: no common eigenvector")
    if len(common) == 2:
        return ReductivityVerdict(
            ReductivityStatus.REDUCTIVE,
            "split: two independent common invariant lines",
            as_witness(common),
        )
    return ReductivityVerdict(
        ReductivityStatus.NON_REDUCTIVE,
        "exactly one common invariant line; it has no invariant complement",
        as_witness(common),
    )
