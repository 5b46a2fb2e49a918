"""
JSON input formats and report models.

Every input model forbids unknown fields; `to_domain` turns a validated payload into
the corresponding domain object.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel

from src.betti import FpGroup, Representation, Word, surface_group
from src.cech import Coefficients, Cochain, CoverNerve, parse_simplex_key
from src.errors import SchemaError
from src.fuchsian import FuchsianSystem, HypergeometricParams
from src.lattice import LatticeConnection, TriangulatedSurface
from src.localsys import GaugeCochain, GCocycle
from src.numkit import Matrix, Mode, float_scalar

Grid = List[List[Any]]


class InputModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, alias_generator=to_camel)


class ReportModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True, alias_generator=to_camel)


def _parse_edge_key(key: str) -> tuple[int, int]:
    edge = parse_simplex_key(key)
    if len(edge) != 2:
        raise SchemaError(f"edge key {key!r} must name two vertices")
    return edge


# ============================================================
# 1. BETTI
# ============================================================
class GroupInput(InputModel):
    generators: int = Field(ge=0, description="Number of generators N")
    relators: List[List[List[int]]] = Field(default=[], description="Relators as [generator, ±1] letter lists")

    def to_domain(self) -> FpGroup:
        return FpGroup(self.generators, tuple(Word.from_json(r) for r in self.relators))


class RepresentationInput(InputModel):
    rank: int = Field(ge=1)
    images: List[Grid]
    group: Optional[GroupInput] = None
    genus: Optional[int] = Field(default=None, description="Shorthand for the genus-g surface group")

    def to_domain(self, mode: Mode, group: Optional[FpGroup] = None) -> Representation:
        if group is None:
            if self.group is not None:
                group = self.group.to_domain()
            elif self.genus is not None:
                group = surface_group(self.genus)
            else:
                raise SchemaError("representation needs an inline group or a genus")
        images = tuple(Matrix.from_json(grid, mode) for grid in self.images)
        if any(m.shape != (self.rank, self.rank) for m in images):
            raise SchemaError(f"every image must be {self.rank}×{self.rank}")
        return Representation(group, images)


class WordsInput(InputModel):
    words: List[List[List[int]]]

    def to_domain(self) -> list[Word]:
        return [Word.from_json(w) for w in self.words]


# ============================================================
# 2. CECH AND LOCAL SYSTEMS
# ============================================================
class NerveInput(InputModel):
    n: int = Field(ge=1, description="Number of open sets in the cover")
    maximal_simplices: List[List[int]]
    declared_good_cover: bool = True

    def to_domain(self) -> CoverNerve:
        return CoverNerve.from_maximal(self.n, self.maximal_simplices, self.declared_good_cover)


class CochainInput(InputModel):
    degree: int = Field(ge=0)
    coefficients: Coefficients
    values: Dict[str, Any]

    def to_domain(self, nerve: CoverNerve, mode: Mode) -> Cochain:
        values = {parse_simplex_key(k): v for k, v in self.values.items()}
        if any(list(s) != sorted(s) for s in values):
            raise SchemaError("cochain keys must list vertices in increasing order")
        return Cochain(nerve, self.degree, self.coefficients, values, mode)


class CocycleInput(InputModel):
    rank: int = Field(ge=1)
    transitions: Dict[str, Grid]

    def to_domain(self, nerve: CoverNerve, mode: Mode) -> GCocycle:
        transitions = {_parse_edge_key(k): Matrix.from_json(v, mode) for k, v in self.transitions.items()}
        cocycle = GCocycle(nerve, transitions)
        if cocycle.rank != self.rank:
            raise SchemaError(f"transitions are {cocycle.rank}×{cocycle.rank}, declared rank {self.rank}")
        return cocycle


class GaugeInput(InputModel):
    values: Dict[str, Grid] = Field(description="Vertex index → invertible matrix")

    def to_domain(self, nerve: CoverNerve, mode: Mode) -> GaugeCochain:
        try:
            values = {int(k): Matrix.from_json(v, mode) for k, v in self.values.items()}
        except ValueError as exc:
            raise SchemaError(f"gauge keys must be vertex indices: {exc}") from exc
        return GaugeCochain(nerve, values)


# ============================================================
# 3. LATTICE
# ============================================================
class SurfaceInput(InputModel):
    vertices: int = Field(ge=3)
    triangles: List[List[int]]
    genus: Optional[int] = None

    def to_domain(self) -> TriangulatedSurface:
        return TriangulatedSurface(self.vertices, tuple(tuple(t) for t in self.triangles), self.genus)


class ConnectionInput(InputModel):
    rank: int = Field(ge=1)
    transport: Dict[str, Grid] = Field(description='Oriented edge "u,v" → transport matrix')

    def to_domain(self, surface: TriangulatedSurface, mode: Mode) -> LatticeConnection:
        transport = {_parse_edge_key(k): Matrix.from_json(v, mode) for k, v in self.transport.items()}
        connection = LatticeConnection(surface, transport)
        if connection.rank != self.rank:
            raise SchemaError(f"transport matrices have rank {connection.rank}, declared {self.rank}")
        return connection


class PathInput(InputModel):
    path: List[List[int]] = Field(description="Consecutive oriented edges [u, v]")

    def to_domain(self) -> list[tuple[int, int]]:
        if any(len(e) != 2 for e in self.path):
            raise SchemaError("path entries must be [u, v] edges")
        return [tuple(e) for e in self.path]


# ============================================================
# 4. FUCHSIAN
# ============================================================
class SystemInput(InputModel):
    rank: int = Field(ge=1)
    a0: Grid = Field(alias="A0")
    a1: Grid = Field(alias="A1")
    lam: Optional[Any] = Field(default=None, alias="lambda")

    def to_domain(self) -> FuchsianSystem:
        a0 = Matrix.from_json(self.a0, Mode.FLOAT)
        a1 = Matrix.from_json(self.a1, Mode.FLOAT)
        if a0.shape != (self.rank, self.rank):
            raise SchemaError(f"A0 must be {self.rank}×{self.rank}")
        lam = 1.0 if self.lam is None else float_scalar(self.lam)
        return FuchsianSystem(a0, a1, lam)


class HypergeometricInput(InputModel):
    a: Any
    b: Any
    c: Any

    def to_domain(self) -> HypergeometricParams:
        return HypergeometricParams(float_scalar(self.a), float_scalar(self.b), float_scalar(self.c))


# ============================================================
# 5. REPORTS
# ============================================================
class EquivalenceReport(ReportModel):
    route: str = Field(description="Chain of constructions compared")
    fingerprint: str = Field(description="sha256 of the route inputs")
    invariants_before: List[Any] = Field(default=[], description="Orbit invariants of the input")
    invariants_after: List[Any] = Field(default=[], description="Orbit invariants after the round trip")
    max_discrepancy: float = 0.0
    exact_equal: Optional[bool] = Field(default=None, description="Set when the route is tolerance-free")
    passed: bool
    details: Dict[str, Any] = {}


class RunReport(ReportModel):
    command: str
    action: str
    mode: str
    tol: Optional[float] = Field(description="Tolerance used; null in exact mode")
    fingerprints: Dict[str, str] = Field(description="sha256 of every input file")
    result: Dict[str, Any]
    checks: Dict[str, bool] = Field(default={}, description="Internal invariant checks; all must hold for exit 0")


class PuncturedDiskInput(InputModel):
    a: Any = Field(description="Residue of the rank-one connection a·dz/z")


# ============================================================
# 6. RUN CONFIGURATION
# ============================================================
class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class RunConfig(InputModel):
    command: str
    action: str
    inputs: List[str] = []
    tol: float = Field(default=1e-9, gt=0, description="Numeric tolerance; ignored by exact computations")
    mode: Mode = Mode.EXACT
    output: Optional[str] = None
    format: OutputFormat = Field(default=OutputFormat.JSON, description="json report, or flat section,key,value csv rows")
    base: Optional[str] = Field(default=None, description="Base vertex (algebraic commands) or base point in ℂ")
    radius: float = Field(default=0.25, gt=0, lt=0.5)
    coefficients: Coefficients = Coefficients.C
    degree: Optional[int] = Field(default=None, ge=0)
    words: Optional[str] = None
    lambdas: List[str] = []
    params: Optional[str] = None
    gauge: Optional[str] = None
    path: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)

    @property
    def effective_tol(self) -> Optional[float]:
        numeric = self.command in ("fuchsian", "equiv") or self.mode is Mode.FLOAT
        return self.tol if numeric else None
