"""
Čech cochains on a cover described by its nerve.

Coefficients are the constant sheaves ℤ, ℂ and ℂ^×. Integral cohomology goes through
the Smith normal form; complex cohomology through exact ranks over ℚ(i). The
exponential x ↦ e^{2πix} (kernel exactly ℤ) links the C and Cx sides, and its
connecting map is the Chern class.
"""
import cmath
import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from types import MappingProxyType
from typing import Mapping, Optional

import networkx as nx
import sympy

from src.errors import CoverNotDeclaredGood, NotClosed, NotCocycle, RankMismatch, SchemaError
from src.numkit import (
    Mode,
    SmithForm,
    exact_scalar,
    float_scalar,
    is_zero,
    reciprocal,
    scalar_to_json,
    smith_normal_form,
)
from src.utils import DEFAULT_TOL

logger = logging.getLogger(__name__)

Simplex = tuple[int, ...]


# ============================================================
# 1. NERVE
# ============================================================
def simplex_key(simplex: Simplex) -> str:
    return ",".join(str(i) for i in simplex)


def parse_simplex_key(key: str) -> Simplex:
    try:
        return tuple(int(part) for part in key.replace(">", ",").split(","))
    except ValueError as exc:
        raise SchemaError(f"bad simplex key {key!r}") from exc


def _permutation_sign(values) -> int:
    values = list(values)
    sign = 1
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if values[i] > values[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class CoverNerve:
    """Nerve of a finite cover {U_0, …, U_{n−1}}; simplices are sorted index tuples."""

    size: int
    simplices: frozenset
    declared_good_cover: bool = True

    def __post_init__(self):
        simplices = frozenset(tuple(s) for s in self.simplices)
        for s in simplices:
            if not s or list(s) != sorted(set(s)):
                raise SchemaError(f"simplex {s} must be a non-empty strictly increasing tuple")
            if s[0] < 0 or s[-1] >= self.size:
                raise SchemaError(f"simplex {s} has an index outside 0..{self.size - 1}")
            if len(s) > 1:
                for face in combinations(s, len(s) - 1):
                    if face not in simplices:
                        raise SchemaError(f"face {face} of {s} is missing (nerve must be downward closed)")
        object.__setattr__(self, "simplices", simplices)

    @classmethod
    def from_maximal(cls, size: int, maximal, declared_good_cover: bool = True) -> "CoverNerve":
        closure = {(i,) for i in range(size)}
        for simplex in maximal:
            simplex = tuple(sorted(set(int(i) for i in simplex)))
            for k in range(1, len(simplex) + 1):
                closure.update(combinations(simplex, k))
        return cls(size, frozenset(closure), declared_good_cover)

    @property
    def dimension(self) -> int:
        return max(len(s) for s in self.simplices) - 1 if self.simplices else -1

    def simplices_of(self, degree: int) -> list[Simplex]:
        return sorted(s for s in self.simplices if len(s) == degree + 1)

    def maximal_simplices(self) -> list[Simplex]:
        return sorted(
            s for s in self.simplices
            if not any(len(t) == len(s) + 1 and set(s) <= set(t) for t in self.simplices)
        )

    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.size))
        graph.add_edges_from(self.simplices_of(1))
        return graph

    def is_connected(self) -> bool:
        return self.size > 0 and nx.is_connected(self.graph())

    def euler_characteristic(self) -> int:
        return sum((-1) ** (len(s) - 1) for s in self.simplices)

    def to_json(self) -> dict:
        return {
            "n": self.size,
            "maximalSimplices": [list(s) for s in self.maximal_simplices()],
            "declaredGoodCover": self.declared_good_cover,
        }


# ============================================================
# 2. COCHAINS
# ============================================================
class Coefficients(str, Enum):
    Z = "Z"
    C = "C"
    CX = "Cx"


@dataclass(frozen=True, eq=False)
class Cochain:
    """Values live on sorted simplices; other orderings follow by sign (Z, C) or inverse (Cx)."""

    nerve: CoverNerve
    degree: int
    coefficients: Coefficients
    values: Mapping[Simplex, object]
    mode: Mode = Mode.EXACT

    def __post_init__(self):
        expected = self.nerve.simplices_of(self.degree)
        given = {tuple(k) for k in self.values}
        if given != set(expected):
            missing = sorted(set(expected) - given)[:3]
            extra = sorted(given - set(expected))[:3]
            raise SchemaError(
                f"degree-{self.degree} cochain must be defined exactly on the {self.degree}-simplices "
                f"(missing {missing}, unexpected {extra})"
            )
        mode = Mode.EXACT if self.coefficients is Coefficients.Z else self.mode
        values = {}
        for simplex in expected:
            raw = self.values[simplex]
            if self.coefficients is Coefficients.Z:
                parsed = exact_scalar(raw)
                if not parsed.is_integer:
                    raise SchemaError(f"integer cochain has non-integer value {raw!r} on {simplex}")
                value = int(parsed)
            elif mode is Mode.EXACT:
                value = exact_scalar(raw)
            else:
                value = float_scalar(raw)
            if self.coefficients is Coefficients.CX and is_zero(value):
                raise SchemaError(f"Cx cochain has zero value on {simplex}")
            values[simplex] = value
        object.__setattr__(self, "values", MappingProxyType(values))
        object.__setattr__(self, "mode", mode)

    # ------------------------------
    # Construction
    # ------------------------------
    @classmethod
    def constant(cls, nerve, degree, coefficients, value, mode: Mode = Mode.EXACT) -> "Cochain":
        return cls(nerve, degree, coefficients, {s: value for s in nerve.simplices_of(degree)}, mode)

    @classmethod
    def zero(cls, nerve, degree, coefficients=Coefficients.C, mode: Mode = Mode.EXACT) -> "Cochain":
        unit = 1 if coefficients is Coefficients.CX else 0
        return cls.constant(nerve, degree, coefficients, unit, mode)

    @classmethod
    def from_vector(cls, nerve, degree, coefficients, vector, mode: Mode = Mode.EXACT) -> "Cochain":
        simplices = nerve.simplices_of(degree)
        vector = list(vector)
        if len(vector) != len(simplices):
            raise SchemaError(f"vector of length {len(vector)} for {len(simplices)} simplices")
        return cls(nerve, degree, coefficients, dict(zip(simplices, vector)), mode)

    # ------------------------------
    # Access
    # ------------------------------
    @property
    def multiplicative(self) -> bool:
        return self.coefficients is Coefficients.CX

    def vector(self) -> list:
        return [self.values[s] for s in self.nerve.simplices_of(self.degree)]

    def value_at(self, simplex) -> object:
        ordered = tuple(sorted(simplex))
        if ordered not in self.values:
            raise SchemaError(f"{simplex} is not a {self.degree}-simplex of the nerve")
        value = self.values[ordered]
        if _permutation_sign(simplex) > 0:
            return value
        if self.multiplicative:
            return reciprocal(value)
        return -value

    def to_json(self) -> dict:
        if self.coefficients is Coefficients.Z:
            values = {simplex_key(s): v for s, v in self.values.items()}
        else:
            values = {simplex_key(s): scalar_to_json(v) for s, v in self.values.items()}
        return {"degree": self.degree, "coefficients": self.coefficients.value, "values": values}

    def with_values(self, values) -> "Cochain":
        return Cochain(self.nerve, self.degree, self.coefficients, values, self.mode)

    def __add__(self, other: "Cochain") -> "Cochain":
        _check_compatible(self, other)
        if self.multiplicative:
            return self.with_values({s: _normalise(v * other.values[s]) for s, v in self.values.items()})
        return self.with_values({s: _normalise(v + other.values[s]) for s, v in self.values.items()})

    def __neg__(self) -> "Cochain":
        if self.multiplicative:
            return self.with_values({s: reciprocal(v) for s, v in self.values.items()})
        return self.with_values({s: _normalise(-v) for s, v in self.values.items()})

    def __sub__(self, other: "Cochain") -> "Cochain":
        return self + (-other)

    def is_trivial(self, tol: float = 0.0) -> bool:
        unit = 1 if self.multiplicative else 0
        return all(is_zero(v - unit, tol) for v in self.values.values())


def _normalise(value):
    return sympy.expand(value) if isinstance(value, sympy.Basic) else value


def _check_compatible(a: Cochain, b: Cochain):
    if a.nerve != b.nerve or a.degree != b.degree or a.coefficients is not b.coefficients:
        raise SchemaError("cochains live on different nerves, degrees or coefficient systems")


# ============================================================
# 3. DIFFERENTIAL
# ============================================================
def coboundary_matrix(nerve: CoverNerve, degree: int) -> sympy.ImmutableMatrix:
    """Integer matrix of δ: C^p → C^{p+1} in the sorted-simplex bases (rows: (p+1)-simplices)."""
    targets = nerve.simplices_of(degree + 1)
    sources = nerve.simplices_of(degree) if degree >= 0 else []
    index = {s: k for k, s in enumerate(sources)}
    entries = sympy.zeros(len(targets), len(sources))
    if degree < 0:
        return sympy.ImmutableMatrix(entries)
    for row, simplex in enumerate(targets):
        for j in range(len(simplex)):
            face = simplex[:j] + simplex[j + 1:]
            entries[row, index[face]] += (-1) ** j
    return sympy.ImmutableMatrix(entries)


def cech_differential(c: Cochain) -> Cochain:
    """(δα)_{i₀…i_{p+1}} = Σ_j (−1)^j α(face_j); alternating product for Cx."""
    values = {}
    for simplex in c.nerve.simplices_of(c.degree + 1):
        faces = [simplex[:j] + simplex[j + 1:] for j in range(len(simplex))]
        if c.multiplicative:
            total = 1
            for j, face in enumerate(faces):
                value = c.values[face]
                total = total * (value if j % 2 == 0 else reciprocal(value))
        else:
            total = 0
            for j, face in enumerate(faces):
                total = total + (-1) ** j * c.values[face]
        values[simplex] = _normalise(total)
    return Cochain(c.nerve, c.degree + 1, c.coefficients, values, c.mode)


def is_cocycle(c: Cochain, tol: float = DEFAULT_TOL) -> bool:
    return cech_differential(c).is_trivial(tol if c.mode is Mode.FLOAT else 0.0)


# ============================================================
# 4. COHOMOLOGY
# ============================================================
def _int_matrix_to_sympy(rows: int, cols: int, columns) -> sympy.ImmutableMatrix:
    return sympy.ImmutableMatrix(rows, cols, lambda i, j: columns[j][i])


@dataclass(frozen=True)
class _Quotient:
    """ker(outgoing) / im(incoming) over ℤ, from two Smith normal forms."""

    outgoing: SmithForm
    image: SmithForm
    kernel: sympy.ImmutableMatrix
    rank: int

    @classmethod
    def build(cls, outgoing: sympy.ImmutableMatrix, incoming: sympy.ImmutableMatrix) -> "_Quotient":
        first = smith_normal_form(outgoing)
        rank = first.rank
        kernel = first.right[:, rank:]
        coordinates = (first.right_inverse * incoming)[rank:, :]
        return cls(first, smith_normal_form(coordinates), sympy.ImmutableMatrix(kernel), rank)

    @property
    def kernel_dimension(self) -> int:
        return self.kernel.shape[1]

    def _basis(self) -> sympy.Matrix:
        return self.kernel * self.image.left_inverse

    def torsion(self) -> list[int]:
        return [d for d in self.image.diagonal if d > 1]

    def torsion_generators(self) -> list[list[int]]:
        basis = self._basis()
        return [[int(x) for x in basis[:, i]] for i, d in enumerate(self.image.diagonal) if d > 1]

    def free_generators(self) -> list[list[int]]:
        basis = self._basis()
        return [[int(x) for x in basis[:, i]] for i in range(self.image.rank, self.kernel_dimension)]

    def coordinates(self, vector) -> tuple[list[int], list[int]]:
        """(torsion coordinates mod d_i, free coordinates) of a kernel element."""
        column = sympy.Matrix(len(vector), 1, list(vector))
        y = (self.outgoing.right_inverse * column)[self.rank:, :]
        w = self.image.left * y
        torsion = [int(w[i]) % d for i, d in enumerate(self.image.diagonal) if d > 1]
        free = [int(w[i]) for i in range(self.image.rank, self.kernel_dimension)]
        return torsion, free


@dataclass(frozen=True)
class CohomologyReport:
    degree: int
    coefficients: Coefficients
    free_rank: int
    torsion: tuple[int, ...]
    representatives: tuple[Cochain, ...]
    torsion_representatives: tuple[Cochain, ...] = ()

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coefficients": self.coefficients.value,
            "freeRank": self.free_rank,
            "torsion": list(self.torsion),
            "representatives": [c.to_json() for c in self.representatives],
            "torsionRepresentatives": [c.to_json() for c in self.torsion_representatives],
        }


def _quotient(nerve: CoverNerve, degree: int) -> _Quotient:
    return _Quotient.build(coboundary_matrix(nerve, degree), coboundary_matrix(nerve, degree - 1))


def cohomology(nerve: CoverNerve, degree: int, coefficients: Coefficients = Coefficients.C) -> CohomologyReport:
    if not nerve.declared_good_cover:
        raise CoverNotDeclaredGood("cohomology of the nerve only computes the space's cohomology for a good cover")
    if coefficients is Coefficients.CX:
        raise SchemaError("cohomology is computed for Z or C coefficients")
    if degree < 0:
        return CohomologyReport(degree, coefficients, 0, (), ())

    quotient = _quotient(nerve, degree)
    free = quotient.free_generators()

    if coefficients is Coefficients.Z:
        torsion_reps = tuple(
            Cochain.from_vector(nerve, degree, Coefficients.Z, v) for v in quotient.torsion_generators()
        )
        reps = tuple(Cochain.from_vector(nerve, degree, Coefficients.Z, v) for v in free)
        return CohomologyReport(degree, coefficients, len(free), tuple(quotient.torsion()), reps, torsion_reps)

    outgoing = coboundary_matrix(nerve, degree)
    incoming = coboundary_matrix(nerve, degree - 1)
    kernel_dim = outgoing.shape[1] - (outgoing.rank() if outgoing.shape[0] else 0)
    image_dim = incoming.rank() if incoming.shape[1] and incoming.shape[0] else 0
    free_rank = kernel_dim - image_dim
    if free_rank != len(free):
        raise RankMismatch(f"rank over Q(i) is {free_rank} but the integral free rank is {len(free)}")
    reps = tuple(Cochain.from_vector(nerve, degree, Coefficients.C, v) for v in free)
    logger.debug("H^%d(C) of %d-vertex nerve has rank %d", degree, nerve.size, free_rank)
    return CohomologyReport(degree, coefficients, free_rank, (), reps)


# ============================================================
# 5. H1 LATTICE AND PERIODS
# ============================================================
def h1_cycles(nerve: CoverNerve) -> list[list[int]]:
    """ℤ-basis of the free part of H₁ as integer 1-chains on the sorted edges."""
    boundary_1 = coboundary_matrix(nerve, 0).T
    boundary_2 = coboundary_matrix(nerve, 1).T
    return _Quotient.build(boundary_1, boundary_2).free_generators()


@dataclass(frozen=True)
class LatticeInclusion:
    """z_j = Σ_i inclusion[i, j] · c_i, with ⟨z_j, cycles_l⟩ = δ_jl."""

    z_basis: tuple[Cochain, ...]
    c_basis: tuple[Cochain, ...]
    inclusion: sympy.ImmutableMatrix
    cycles: tuple[tuple[int, ...], ...]

    def to_json(self) -> dict:
        return {
            "zBasis": [c.to_json() for c in self.z_basis],
            "cBasis": [c.to_json() for c in self.c_basis],
            "inclusion": [[str(self.inclusion[i, j]) for j in range(self.inclusion.shape[1])]
                          for i in range(self.inclusion.shape[0])],
            "cycles": [list(c) for c in self.cycles],
        }


def _pairing(vector, cycle) -> object:
    total = 0
    for value, weight in zip(vector, cycle):
        if weight:
            total = total + weight * value
    return _normalise(total)


def h1_lattice_inclusion(nerve: CoverNerve) -> LatticeInclusion:
    integral = cohomology(nerve, 1, Coefficients.Z)
    complex_ = cohomology(nerve, 1, Coefficients.C)
    cycles = h1_cycles(nerve)
    if integral.free_rank != complex_.free_rank or len(cycles) != complex_.free_rank:
        raise RankMismatch(
            f"rank H¹(ℤ) = {integral.free_rank}, dim H¹(ℂ) = {complex_.free_rank}, rank H₁ = {len(cycles)}"
        )
    k = len(cycles)
    if k == 0:
        return LatticeInclusion((), (), sympy.ImmutableMatrix(sympy.zeros(0, 0)), ())

    c_vectors = [c.vector() for c in complex_.representatives]
    pairing = sympy.Matrix(k, k, lambda i, l: _pairing(c_vectors[i], cycles[l]))
    if pairing.det() == 0:
        raise RankMismatch("cohomology and homology bases pair degenerately")
    inclusion = sympy.ImmutableMatrix(pairing.inv().T)

    edges = nerve.simplices_of(1)
    z_basis = []
    for j in range(k):
        vector = [sum(inclusion[i, j] * c_vectors[i][e] for i in range(k)) for e in range(len(edges))]
        if not all(sympy.sympify(x).is_integer for x in vector):
            raise RankMismatch("integral lattice is not unimodular against the homology basis")
        z_basis.append(Cochain.from_vector(nerve, 1, Coefficients.Z, [int(x) for x in vector]))
    return LatticeInclusion(tuple(z_basis), complex_.representatives, inclusion, tuple(tuple(c) for c in cycles))


def periods(cochain: Cochain, cycles) -> list:
    """⟨a, h⟩ for each integer 1-chain h."""
    if cochain.degree != 1 or cochain.multiplicative:
        raise SchemaError("periods pair additive 1-cochains with 1-chains")
    vector = cochain.vector()
    return [_pairing(vector, cycle) for cycle in cycles]


def moduli_coordinates(cocycle: Cochain, tol: float = DEFAULT_TOL) -> list[complex]:
    """Point of (ℂ^×)^{2g}: e^{2πi·period} on the canonical H₁ basis."""
    if cocycle.degree != 1 or cocycle.coefficients is not Coefficients.C:
        raise SchemaError("moduli coordinates take a C-valued 1-cocycle")
    if not is_cocycle(cocycle, tol):
        raise NotClosed("1-cochain is not closed")
    return [cmath.exp(2j * cmath.pi * complex(p)) for p in periods(cocycle, h1_cycles(cocycle.nerve))]


# ============================================================
# 6. EXPONENTIAL SEQUENCE AND CHERN CLASS
# ============================================================
@dataclass(frozen=True)
class ChernClass:
    cocycle: Cochain
    torsion: tuple[int, ...]
    torsion_coordinates: tuple[int, ...]
    free_coordinates: tuple[int, ...]

    @property
    def is_zero(self) -> bool:
        return not any(self.torsion_coordinates) and not any(self.free_coordinates)

    def to_json(self) -> dict:
        return {
            "cocycle": self.cocycle.to_json(),
            "isZero": self.is_zero,
            "torsion": list(self.torsion),
            "torsionCoordinates": list(self.torsion_coordinates),
            "freeCoordinates": list(self.free_coordinates),
        }


def _check_multiplicative_cocycle(u: Cochain, tol: float):
    if u.degree != 1 or not u.multiplicative:
        raise SchemaError("expected a Cx-valued 1-cochain")
    if not is_cocycle(u, tol):
        raise NotCocycle("multiplicative 1-cochain violates u_ij u_jk u_ki = 1")


def _log_lift(u: Cochain, branch_shifts: Optional[Mapping] = None) -> dict:
    shifts = branch_shifts or {}
    return {
        s: cmath.log(complex(v)) / (2j * cmath.pi) + int(shifts.get(s, 0))
        for s, v in u.values.items()
    }


def _integral_defect(u: Cochain, lift: dict, tol: float) -> Cochain:
    additive = Cochain(u.nerve, 1, Coefficients.C, lift, Mode.FLOAT)
    defect = cech_differential(additive)
    values = {}
    for simplex, value in defect.values.items():
        nearest = round(value.real)
        if abs(value - nearest) > max(tol, 1e-6):
            raise NotCocycle(f"δ(log u)/2πi is not integral on {simplex}: {value}")
        values[simplex] = int(nearest)
    return Cochain(u.nerve, 2, Coefficients.Z, values)


def chern_class(u: Cochain, tol: float = DEFAULT_TOL, branch_shifts: Optional[Mapping] = None) -> ChernClass:
    """Connecting map H¹(ℂ^×) → H²(ℤ) of 0 → ℤ → ℂ → ℂ^× → 0."""
    _check_multiplicative_cocycle(u, tol)
    defect = _integral_defect(u, _log_lift(u, branch_shifts), tol)
    quotient = _quotient(u.nerve, 2)
    torsion, free = quotient.coordinates(defect.vector())
    return ChernClass(defect, tuple(quotient.torsion()), tuple(torsion), tuple(free))


def exp_lift(u: Cochain, tol: float = DEFAULT_TOL) -> Optional[Cochain]:
    """Closed C-cochain a with e^{2πi a} = u, or None when the Chern class is nonzero."""
    _check_multiplicative_cocycle(u, tol)
    lift = _log_lift(u)
    defect = _integral_defect(u, lift, tol)
    quotient = _quotient(u.nerve, 2)
    torsion, free = quotient.coordinates(defect.vector())
    if any(torsion) or any(free):
        return None

    # solve δm = defect over ℤ and subtract m from the principal lift
    edges = u.nerve.simplices_of(1)
    correction = [0] * len(edges)
    defect_vector = defect.vector()
    if defect_vector and edges:
        smith = smith_normal_form(coboundary_matrix(u.nerve, 1))
        target = smith.left * sympy.Matrix(len(defect_vector), 1, defect_vector)
        y = [0] * len(edges)
        for i, d in enumerate(smith.diagonal):
            if d:
                y[i] = int(target[i]) // d
        solution = smith.right * sympy.Matrix(len(edges), 1, y)
        correction = [int(x) for x in solution]
    values = {e: lift[e] - correction[k] for k, e in enumerate(edges)}
    return Cochain(u.nerve, 1, Coefficients.C, values, Mode.FLOAT)
