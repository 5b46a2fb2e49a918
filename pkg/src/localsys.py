"""
Local systems as G-valued Čech 1-cocycles on a nerve, the gauge action of 0-cochains,
the edge-path fundamental group of the nerve, and the monodromy correspondence between
cocycles and representations.

Loop products compose left to right in path order: the loop v₀ → v₁ → … → v₀ has
monodromy g_{v₀v₁} g_{v₁v₂} ⋯.
"""
import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import networkx as nx

from src.betti import FpGroup, Representation, Word, check_relations
from src.cech import Coefficients, Cochain, CoverNerve, h1_cycles, h1_lattice_inclusion
from src.errors import (
    DimensionMismatch,
    Disconnected,
    IndexOutOfRange,
    InvalidCocycle,
    MissingEdge,
    ModeMismatch,
    NotAbelian,
    PresentationMismatch,
    SchemaError,
)
from src.numkit import Matrix, Mode, smith_normal_form
from src.utils import DEFAULT_TOL

logger = logging.getLogger(__name__)

Edge = tuple[int, int]


# ============================================================
# 1. COCYCLES AND GAUGES
# ============================================================
def _common_shape(matrices, what: str) -> tuple[int, Mode]:
    matrices = list(matrices)
    if not matrices:
        return 0, Mode.EXACT
    modes = {m.mode for m in matrices}
    if len(modes) > 1:
        raise ModeMismatch(f"{what} mixes exact and float matrices")
    shapes = {m.shape for m in matrices}
    if len(shapes) > 1:
        raise DimensionMismatch(f"{what} has matrices of different shapes: {sorted(shapes)}")
    rows, cols = shapes.pop()
    if rows != cols:
        raise DimensionMismatch(f"{what} matrices must be square")
    return rows, modes.pop()


@dataclass(frozen=True, eq=False)
class GCocycle:
    """Transitions g_ij on the sorted edges of the nerve; g_ji is derived as g_ij⁻¹."""

    nerve: CoverNerve
    transitions: Mapping[Edge, Matrix]
    _inverses: Mapping[Edge, Matrix] = field(init=False, repr=False)

    def __post_init__(self):
        edges = self.nerve.simplices_of(1)
        _common_shape(self.transitions.values(), "cocycle")
        given = {}
        for (i, j), value in self.transitions.items():
            if i == j:
                raise SchemaError(f"transition on degenerate edge ({i}, {j})")
            if i < j:
                given[(i, j)] = value
            else:
                given[(j, i)] = value.inverse()
        unknown = sorted(set(given) - set(edges))
        if unknown:
            raise SchemaError(f"transitions given on non-edges {unknown[:3]}")
        missing = [e for e in edges if e not in given]
        if missing:
            raise MissingEdge(f"no transition for edges {missing[:3]}")
        ordered = {e: given[e] for e in edges}
        _common_shape(ordered.values(), "cocycle")
        object.__setattr__(self, "transitions", MappingProxyType(ordered))
        object.__setattr__(self, "_inverses", MappingProxyType({e: m.inverse() for e, m in ordered.items()}))

    @classmethod
    def trivial(cls, nerve: CoverNerve, rank: int, mode: Mode = Mode.EXACT) -> "GCocycle":
        return cls(nerve, {e: Matrix.identity(rank, mode) for e in nerve.simplices_of(1)})

    @classmethod
    def from_cochain(cls, cochain: Cochain) -> "GCocycle":
        if cochain.degree != 1 or cochain.coefficients is not Coefficients.CX:
            raise SchemaError("a rank-one cocycle comes from a Cx-valued 1-cochain")
        return cls(
            cochain.nerve,
            {e: Matrix.from_rows([[v]], cochain.mode) for e, v in cochain.values.items()},
        )

    @property
    def rank(self) -> int:
        return _common_shape(self.transitions.values(), "cocycle")[0]

    @property
    def mode(self) -> Mode:
        return _common_shape(self.transitions.values(), "cocycle")[1]

    def transition(self, i: int, j: int) -> Matrix:
        if i < j:
            edge, table = (i, j), self.transitions
        else:
            edge, table = (j, i), self._inverses
        if edge not in table:
            raise MissingEdge(f"({i}, {j}) is not an edge of the nerve")
        return table[edge]

    def to_cochain(self) -> Cochain:
        if self.rank != 1:
            raise SchemaError(f"only rank-one cocycles are Cx cochains (rank is {self.rank})")
        return Cochain(self.nerve, 1, Coefficients.CX, {e: m[0, 0] for e, m in self.transitions.items()}, self.mode)

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "transitions": {f"{i},{j}": m.to_json() for (i, j), m in self.transitions.items()},
        }


def loop_product(c: GCocycle, vertices: Sequence[int]) -> Matrix:
    """Left-to-right product of transitions along consecutive vertices."""
    result = Matrix.identity(c.rank, c.mode)
    for u, v in zip(vertices, vertices[1:]):
        if u != v:
            result = result @ c.transition(u, v)
    return result


def validate_cocycle(c: GCocycle, tol: float = DEFAULT_TOL) -> bool:
    """g_ij g_jk g_ki = id on every 2-simplex."""
    for i, j, k in c.nerve.simplices_of(2):
        if not loop_product(c, (i, j, k, i)).is_identity(tol):
            logger.debug("cocycle condition fails on (%d, %d, %d)", i, j, k)
            return False
    return True


@dataclass(frozen=True, eq=False)
class GaugeCochain:
    nerve: CoverNerve
    values: Mapping[int, Matrix]

    def __post_init__(self):
        missing = [v for v in range(self.nerve.size) if v not in self.values]
        if missing:
            raise SchemaError(f"gauge is missing vertices {missing[:3]}")
        ordered = {v: self.values[v] for v in range(self.nerve.size)}
        _common_shape(ordered.values(), "gauge")
        for vertex, value in ordered.items():
            value.inverse()
        object.__setattr__(self, "values", MappingProxyType(ordered))

    @classmethod
    def identity(cls, nerve: CoverNerve, rank: int, mode: Mode = Mode.EXACT) -> "GaugeCochain":
        return cls(nerve, {v: Matrix.identity(rank, mode) for v in range(nerve.size)})

    def __matmul__(self, other: "GaugeCochain") -> "GaugeCochain":
        return GaugeCochain(self.nerve, {v: self.values[v] @ other.values[v] for v in self.values})


def gauge_act(g: GaugeCochain, c: GCocycle) -> GCocycle:
    """h_ij ↦ g_i h_ij g_j⁻¹; preserves the cocycle condition for any G."""
    if g.nerve != c.nerve:
        raise SchemaError("gauge and cocycle live on different nerves")
    inverses = {v: m.inverse() for v, m in g.values.items()}
    return GCocycle(c.nerve, {(i, j): g.values[i] @ h @ inverses[j] for (i, j), h in c.transitions.items()})


# ============================================================
# 2. EDGE-PATH GROUP
# ============================================================
@dataclass(frozen=True, eq=False)
class Pi1Presentation:
    """π₁ of the nerve's 2-skeleton: one generator per non-tree edge, one relator per 2-simplex."""

    nerve: CoverNerve
    basepoint: int
    parent: Mapping[int, Optional[int]]
    tree_edges: frozenset
    generators: tuple[Edge, ...]
    relators: tuple[Word, ...]

    @property
    def group(self) -> FpGroup:
        return FpGroup(len(self.generators), self.relators)

    def generator_index(self, edge: Edge) -> Optional[int]:
        try:
            return self.generators.index(tuple(sorted(edge))) + 1
        except ValueError:
            return None

    def tree_path(self, vertex: int) -> list[int]:
        """Vertices from the basepoint to `vertex` along the spanning tree."""
        path = [vertex]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        return path[::-1]

    def edge_word(self, i: int, j: int) -> Word:
        index = self.generator_index((i, j))
        if index is None:
            return Word()
        return Word.generator(index, 1 if i < j else -1)

    def path_word(self, vertices: Sequence[int]) -> Word:
        word = Word()
        for u, v in zip(vertices, vertices[1:]):
            if u != v:
                word = word * self.edge_word(u, v)
        return word.reduced()

    def generator_loop(self, k: int) -> list[int]:
        """basepoint → a → b → basepoint for the k-th (1-based) generator edge (a, b)."""
        if not 1 <= k <= len(self.generators):
            raise IndexOutOfRange(f"generator {k} outside 1..{len(self.generators)}")
        a, b = self.generators[k - 1]
        return self.tree_path(a) + self.tree_path(b)[::-1]

    def word_path(self, word: Word) -> list[int]:
        path = [self.basepoint]
        for g, s in word.letters:
            loop = self.generator_loop(g)
            if s < 0:
                loop = loop[::-1]
            path.extend(loop[1:])
        return path

    def cycle_word(self, chain: Sequence[int]) -> Word:
        """A word whose loop is homologous to the integer 1-cycle `chain` (on sorted edges)."""
        edges = self.nerve.simplices_of(1)
        letters = []
        for k, edge in enumerate(self.generators, start=1):
            weight = chain[edges.index(edge)]
            letters += [(k, 1 if weight > 0 else -1)] * abs(weight)
        return Word(tuple(letters))

    def to_json(self) -> dict:
        return {
            "basepoint": self.basepoint,
            "treeEdges": [list(e) for e in sorted(self.tree_edges)],
            "generators": [list(e) for e in self.generators],
            "relators": [r.to_json() for r in self.relators],
        }


def path_chain(nerve: CoverNerve, vertices: Sequence[int]) -> list[int]:
    """Integer 1-chain on sorted edges traversed by a vertex path."""
    edges = nerve.simplices_of(1)
    index = {e: k for k, e in enumerate(edges)}
    chain = [0] * len(edges)
    for u, v in zip(vertices, vertices[1:]):
        if u == v:
            continue
        edge = (min(u, v), max(u, v))
        if edge not in index:
            raise MissingEdge(f"({u}, {v}) is not an edge of the nerve")
        chain[index[edge]] += 1 if u < v else -1
    return chain


def pi1_presentation(nerve: CoverNerve, basepoint: int = 0) -> Pi1Presentation:
    if not 0 <= basepoint < nerve.size:
        raise IndexOutOfRange(f"basepoint {basepoint} outside 0..{nerve.size - 1}")
    graph = nerve.graph()
    if not nx.is_connected(graph):
        raise Disconnected(f"1-skeleton has {nx.number_connected_components(graph)} components")

    parent: dict[int, Optional[int]] = {basepoint: None}
    parent.update(dict(nx.bfs_predecessors(graph, basepoint)))
    tree_edges = frozenset(tuple(sorted((v, p))) for v, p in parent.items() if p is not None)
    generators = tuple(e for e in nerve.simplices_of(1) if e not in tree_edges)

    presentation = Pi1Presentation(nerve, basepoint, MappingProxyType(parent), tree_edges, generators, ())
    relators = []
    for i, j, k in nerve.simplices_of(2):
        word = presentation.path_word((i, j, k, i))
        if word.letters:
            relators.append(word)
    logger.debug(
        "edge-path group: %d generators, %d relators (tree of %d edges)",
        len(generators), len(relators), len(tree_edges),
    )
    return Pi1Presentation(nerve, basepoint, MappingProxyType(parent), tree_edges, generators, tuple(relators))


def abelianization(p: Pi1Presentation) -> tuple[int, list[int]]:
    """(free rank, torsion coefficients) of the abelianized group."""
    n = len(p.generators)
    if not p.relators:
        return n, []
    rows = []
    for relator in p.relators:
        row = [0] * n
        for g, s in relator.letters:
            row[g - 1] += s
        rows.append(row)
    smith = smith_normal_form(rows) if n else None
    rank = smith.rank if smith else 0
    torsion = [d for d in smith.diagonal if d > 1] if smith else []
    return n - rank, torsion


def homology_words(p: Pi1Presentation) -> list[Word]:
    """Words for the canonical H₁ basis loops."""
    return [p.cycle_word(h) for h in h1_cycles(p.nerve)]


# ============================================================
# 3. MONODROMY
# ============================================================
def monodromy(c: GCocycle, p: Pi1Presentation, tol: float = DEFAULT_TOL) -> Representation:
    if c.nerve != p.nerve:
        raise PresentationMismatch("cocycle and presentation live on different nerves")
    if not validate_cocycle(c, tol):
        raise InvalidCocycle("transitions violate g_ij g_jk g_ki = id")
    images = tuple(loop_product(c, p.generator_loop(k)) for k in range(1, len(p.generators) + 1))
    rep = Representation(p.group, images)
    if not check_relations(rep, tol):
        raise InvalidCocycle("monodromy images do not satisfy the edge-path relators")
    return rep


def rep_to_cocycle(rep: Representation, p: Pi1Presentation) -> GCocycle:
    """Tree edges carry the identity; the k-th generator edge carries the k-th image."""
    if not rep.group.same_presentation(p.group):
        raise PresentationMismatch(
            f"representation group ({rep.group.num_generators} generators, {len(rep.group.relators)} relators) "
            f"does not match the nerve presentation ({len(p.generators)} generators, {len(p.relators)} relators)"
        )
    transitions = {}
    for edge in p.nerve.simplices_of(1):
        index = p.generator_index(edge)
        transitions[edge] = Matrix.identity(rep.rank, rep.mode) if index is None else rep.images[index - 1]
    return GCocycle(p.nerve, transitions)


def abelian_representation(p: Pi1Presentation, values: Sequence[Matrix], tol: float = DEFAULT_TOL) -> Representation:
    """Representation sending the l-th H₁ basis loop to values[l] (the values must commute).

    Generator j goes to Π_l values[l]^{⟨z_l, loop_j⟩} with z the integral basis dual to the cycles.
    """
    values = list(values)
    lattice = h1_lattice_inclusion(p.nerve)
    if len(values) != len(lattice.cycles):
        raise PresentationMismatch(f"expected {len(lattice.cycles)} values (rank of H₁), got {len(values)}")
    for a_index, a in enumerate(values):
        for b in values[a_index + 1:]:
            if not (a @ b).equals(b @ a, tol):
                raise NotAbelian("abelian representations need commuting values")

    rank, mode = _common_shape(values, "values") if values else (1, Mode.EXACT)
    z_vectors = [z.vector() for z in lattice.z_basis]
    images = []
    for k in range(1, len(p.generators) + 1):
        chain = path_chain(p.nerve, p.generator_loop(k))
        image = Matrix.identity(rank, mode)
        for value, z in zip(values, z_vectors):
            exponent = sum(int(a) * b for a, b in zip(z, chain))
            if exponent:
                image = image @ value.power(exponent)
        images.append(image)
    return Representation(p.group, tuple(images))
