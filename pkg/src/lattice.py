"""
Discrete connections on triangulated surfaces.

A connection is a transport matrix T(u→v) on every oriented edge, mapping the fiber
at u to the fiber at v, with T(v→u) = T(u→v)⁻¹. Paths multiply left to right. The
all-identity transport plays the role of the trivial connection D.
"""
import cmath
import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import networkx as nx
import sympy

from src.betti import Representation, Word, evaluate_word, surface_group, validate
from src.cech import CoverNerve, h1_lattice_inclusion
from src.errors import (
    BrokenPath,
    DegreeTooHigh,
    DimensionMismatch,
    GenusMismatch,
    InvalidGenus,
    MissingEdge,
    NotFlat,
    RankNotOne,
    SchemaError,
)
from src.localsys import GCocycle, Pi1Presentation, homology_words, monodromy, pi1_presentation
from src.numkit import Matrix, Mode, as_scalar, is_zero
from src.utils import DEFAULT_TOL

logger = logging.getLogger(__name__)

Edge = tuple[int, int]
Triangle = tuple[int, int, int]

# Möbius–Császár torus: triangles (i, i+1, i+3) and (i, i+3, i+2) mod 7
_TORUS_TRIANGLES = tuple(
    triangle
    for i in range(7)
    for triangle in ((i, (i + 1) % 7, (i + 3) % 7), (i, (i + 3) % 7, (i + 2) % 7))
)
_TETRAHEDRON_TRIANGLES = ((0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3))
_ANNULUS_TRIANGLES = ((0, 1, 4), (0, 4, 3), (1, 2, 5), (1, 5, 4), (2, 0, 3), (2, 3, 5))


def _sorted_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def _boundary_edges(triangle: Triangle) -> list[Edge]:
    a, b, c = triangle
    return [(a, b), (b, c), (c, a)]


# ============================================================
# 1. SURFACES
# ============================================================
@dataclass(frozen=True)
class TriangulatedSurface:
    vertex_count: int
    triangles: tuple[Triangle, ...]
    declared_genus: Optional[int] = None
    _edge_faces: Mapping[Edge, tuple] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        triangles = tuple(tuple(int(v) for v in t) for t in self.triangles)
        seen = set()
        incidence: dict[Edge, list[Edge]] = {}
        for t in triangles:
            if len(t) != 3 or len(set(t)) != 3:
                raise SchemaError(f"triangle {t} must have three distinct vertices")
            if min(t) < 0 or max(t) >= self.vertex_count:
                raise SchemaError(f"triangle {t} has a vertex outside 0..{self.vertex_count - 1}")
            key = frozenset(t)
            if key in seen:
                raise SchemaError(f"triangle {t} is listed twice")
            seen.add(key)
            for u, v in _boundary_edges(t):
                incidence.setdefault(_sorted_edge(u, v), []).append((u, v))
        for edge, uses in incidence.items():
            if len(uses) > 2:
                raise SchemaError(f"edge {edge} lies on {len(uses)} triangles; not a surface")
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(
            self, "_edge_faces", MappingProxyType({e: tuple(incidence[e]) for e in sorted(incidence)})
        )
        if self.declared_genus is not None:
            if not (self.is_closed and self.is_consistently_oriented):
                raise GenusMismatch("a genus is only declared for closed oriented surfaces")
            if self.genus != self.declared_genus:
                raise GenusMismatch(
                    f"Euler characteristic {self.euler_characteristic} gives genus {self.genus}, "
                    f"declared {self.declared_genus}"
                )

    # ------------------------------
    # Standard surfaces
    # ------------------------------
    @classmethod
    def torus(cls) -> "TriangulatedSurface":
        return cls(7, _TORUS_TRIANGLES)

    @classmethod
    def tetrahedron(cls) -> "TriangulatedSurface":
        return cls(4, _TETRAHEDRON_TRIANGLES)

    @classmethod
    def annulus(cls) -> "TriangulatedSurface":
        return cls(6, _ANNULUS_TRIANGLES)

    @classmethod
    def of_genus(cls, genus: int) -> "TriangulatedSurface":
        """Closed oriented genus-g surface; g ≥ 2 by repeated connected sum with the 7-vertex torus."""
        if genus < 0:
            raise InvalidGenus(f"genus must be ≥ 0, got {genus}")
        if genus == 0:
            return cls(4, _TETRAHEDRON_TRIANGLES, declared_genus=0)
        surface = cls.torus()
        for _ in range(genus - 1):
            surface = surface.connected_sum_with_torus()
        return cls(surface.vertex_count, surface.triangles, declared_genus=genus)

    def connected_sum_with_torus(self) -> "TriangulatedSurface":
        """Remove the last triangle here and one torus triangle, then glue (the torus copy is reversed)."""
        a, b, c = self.triangles[-1]
        x, y, z = _TORUS_TRIANGLES[-1]
        relabel = {x: a, y: b, z: c}
        fresh = self.vertex_count
        for v in range(7):
            if v not in relabel:
                relabel[v] = fresh
                fresh += 1
        copy = [
            (relabel[t[0]], relabel[t[2]], relabel[t[1]])
            for t in _TORUS_TRIANGLES[:-1]
        ]
        return TriangulatedSurface(fresh, self.triangles[:-1] + tuple(copy))

    # ------------------------------
    # Combinatorics
    # ------------------------------
    @property
    def edges(self) -> list[Edge]:
        return list(self._edge_faces)

    @property
    def is_closed(self) -> bool:
        return all(len(uses) == 2 for uses in self._edge_faces.values())

    @property
    def has_boundary(self) -> bool:
        return not self.is_closed

    @property
    def is_consistently_oriented(self) -> bool:
        """Every interior edge is traversed once in each direction by its two triangles."""
        return all(len(uses) == 1 or uses[0] == uses[1][::-1] for uses in self._edge_faces.values())

    @property
    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self._edge_faces) + len(self.triangles)

    @property
    def genus(self) -> Optional[int]:
        if not (self.is_closed and self.is_consistently_oriented):
            return None
        return (2 - self.euler_characteristic) // 2

    def nerve(self) -> CoverNerve:
        """Nerve of the vertex-star cover: the triangulation itself."""
        return CoverNerve.from_maximal(self.vertex_count, self.triangles)

    def to_json(self) -> dict:
        return {"vertices": self.vertex_count, "triangles": [list(t) for t in self.triangles]}


# ============================================================
# 2. CONNECTIONS AND FORMS
# ============================================================
@dataclass(frozen=True, eq=False)
class LatticeConnection:
    surface: TriangulatedSurface
    transport_map: Mapping[Edge, Matrix]
    _inverses: Mapping[Edge, Matrix] = field(init=False, repr=False)

    def __post_init__(self):
        if len({m.mode for m in self.transport_map.values()}) > 1:
            raise SchemaError("transport matrices must share one mode")
        shapes = {m.shape for m in self.transport_map.values()}
        if len(shapes) > 1 or any(rows != cols for rows, cols in shapes):
            raise DimensionMismatch(f"transport matrices must be square of one size, got {sorted(shapes)}")
        given = {}
        for (u, v), value in self.transport_map.items():
            given[_sorted_edge(u, v)] = value if u < v else value.inverse()
        unknown = sorted(set(given) - set(self.surface.edges))
        if unknown:
            raise SchemaError(f"transport given on non-edges {unknown[:3]}")
        missing = [e for e in self.surface.edges if e not in given]
        if missing:
            raise MissingEdge(f"no transport for edges {missing[:3]}")
        ordered = {e: given[e] for e in self.surface.edges}
        object.__setattr__(self, "transport_map", MappingProxyType(ordered))
        object.__setattr__(self, "_inverses", MappingProxyType({e: m.inverse() for e, m in ordered.items()}))

    @classmethod
    def trivial(cls, surface: TriangulatedSurface, rank: int = 1, mode: Mode = Mode.EXACT) -> "LatticeConnection":
        return cls(surface, {e: Matrix.identity(rank, mode) for e in surface.edges})

    @property
    def rank(self) -> int:
        return next(iter(self.transport_map.values())).shape[0]

    @property
    def mode(self) -> Mode:
        return next(iter(self.transport_map.values())).mode

    def transport(self, u: int, v: int) -> Matrix:
        edge = _sorted_edge(u, v)
        if edge not in self.transport_map:
            raise BrokenPath(f"({u}, {v}) is not an edge of the surface")
        return self.transport_map[edge] if u < v else self._inverses[edge]

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "transport": {f"{u}>{v}": m.to_json() for (u, v), m in self.transport_map.items()},
        }


@dataclass(frozen=True, eq=False)
class DiscreteForm:
    """Degree 0: vertex values. Degree 1: values on sorted edges, odd under reversal. Degree 2: per listed triangle."""

    surface: TriangulatedSurface
    degree: int
    values: Mapping
    mode: Mode = Mode.EXACT

    def __post_init__(self):
        if self.degree == 0:
            keys = list(range(self.surface.vertex_count))
            given = dict(self.values)
        elif self.degree == 1:
            keys = self.surface.edges
            given = {}
            for (u, v), value in self.values.items():
                given[_sorted_edge(u, v)] = value if u < v else -as_scalar(value, self.mode)
        elif self.degree == 2:
            keys = list(self.surface.triangles)
            given = {tuple(k): v for k, v in self.values.items()}
        else:
            raise SchemaError(f"forms on a surface have degree 0, 1 or 2, got {self.degree}")
        if set(given) != set(keys):
            raise SchemaError(f"degree-{self.degree} form must have a value on every cell")
        ordered = {k: as_scalar(given[k], self.mode) for k in keys}
        object.__setattr__(self, "values", MappingProxyType(ordered))

    def at(self, *cell):
        if self.degree == 1:
            u, v = cell
            value = self.values[_sorted_edge(u, v)]
            return value if u < v else -value
        return self.values[cell[0] if len(cell) == 1 else tuple(cell)]


def _clean(value):
    return sympy.expand(value) if isinstance(value, sympy.Basic) else value


def d(form: DiscreteForm) -> DiscreteForm:
    """(df)(u→v) = f(v) − f(u); (dA)(face) = oriented sum of A around the boundary."""
    surface = form.surface
    if form.degree == 0:
        values = {(u, v): _clean(form.at(v) - form.at(u)) for u, v in surface.edges}
        return DiscreteForm(surface, 1, values, form.mode)
    if form.degree == 1:
        values = {}
        for t in surface.triangles:
            total = 0
            for u, v in _boundary_edges(t):
                total = total + form.at(u, v)
            values[t] = _clean(total)
        return DiscreteForm(surface, 2, values, form.mode)
    raise DegreeTooHigh("d of a 2-form on a surface is zero-dimensional; degree must be ≤ 1")


# ============================================================
# 3. CURVATURE, GAUGE, HOLONOMY
# ============================================================
def _face_loop(triangle: Triangle) -> list[int]:
    k = triangle.index(min(triangle))
    a, b, c = triangle[k:] + triangle[:k]
    return [a, b, c, a]


def holonomy_along(conn: LatticeConnection, vertices: Sequence[int]) -> Matrix:
    result = Matrix.identity(conn.rank, conn.mode)
    for u, v in zip(vertices, vertices[1:]):
        result = result @ conn.transport(u, v)
    return result


def holonomy(conn: LatticeConnection, path: Sequence[Edge]) -> Matrix:
    """Ordered product of transports along a list of consecutive oriented edges."""
    path = [tuple(e) for e in path]
    if not path:
        return Matrix.identity(conn.rank, conn.mode)
    for (_, end), (start, _) in zip(path, path[1:]):
        if end != start:
            raise BrokenPath(f"edge ending at {end} is followed by one starting at {start}")
    return holonomy_along(conn, [path[0][0]] + [v for _, v in path])


def curvature(conn: LatticeConnection) -> dict[Triangle, Matrix]:
    """Boundary holonomy of each face, starting at its smallest vertex."""
    return {t: holonomy_along(conn, _face_loop(t)) for t in conn.surface.triangles}


def is_flat(conn: LatticeConnection, tol: float = DEFAULT_TOL) -> bool:
    return all(m.is_identity(tol) for m in curvature(conn).values())


def gauge_act(g: Mapping[int, Matrix], conn: LatticeConnection) -> LatticeConnection:
    """T(u→v) ↦ g(u)⁻¹ · T(u→v) · g(v)."""
    missing = [v for v in range(conn.surface.vertex_count) if v not in g]
    if missing:
        raise SchemaError(f"gauge is missing vertices {missing[:3]}")
    inverses = {v: g[v].inverse() for v in range(conn.surface.vertex_count)}
    return LatticeConnection(
        conn.surface,
        {(u, v): inverses[u] @ t @ g[v] for (u, v), t in conn.transport_map.items()},
    )


# ============================================================
# 4. MONODROMY AND ABELIAN MODULI
# ============================================================
def as_cocycle(conn: LatticeConnection) -> GCocycle:
    """The flat connection as a G-cocycle on the vertex-star nerve, g_ij = T(i→j)."""
    return GCocycle(conn.surface.nerve(), dict(conn.transport_map))


def _require_flat(conn: LatticeConnection, tol: float):
    if not is_flat(conn, tol):
        worst = max(
            m.distance(Matrix.identity(conn.rank, conn.mode)) for m in curvature(conn).values()
        )
        raise NotFlat(f"curvature deviates from identity by up to {worst:.3e}")


def monodromy_rep(conn: LatticeConnection, basepoint: int = 0, tol: float = DEFAULT_TOL) -> Representation:
    _require_flat(conn, tol)
    presentation = pi1_presentation(conn.surface.nerve(), basepoint)
    return monodromy(as_cocycle(conn), presentation, tol)


def abelian_moduli(conn: LatticeConnection, tol: float = DEFAULT_TOL) -> list:
    """Holonomy of a flat rank-one connection around the canonical H₁ basis loops."""
    if conn.rank != 1:
        raise RankNotOne(f"abelian moduli need a rank-one connection, got rank {conn.rank}")
    _require_flat(conn, tol)
    presentation = pi1_presentation(conn.surface.nerve())
    return [
        holonomy_along(conn, presentation.word_path(word))[0, 0]
        for word in homology_words(presentation)
    ]


def connection_from_form(form: DiscreteForm) -> LatticeConnection:
    """Rank-one transport e^{−A(e)} (float mode)."""
    if form.degree != 1:
        raise SchemaError("a connection form has degree 1")
    return LatticeConnection(
        form.surface,
        {e: Matrix.from_rows([[cmath.exp(-complex(a))]], Mode.FLOAT) for e, a in form.values.items()},
    )


def abelian_connection(surface: TriangulatedSurface, targets: Sequence, mode: Mode = Mode.EXACT) -> LatticeConnection:
    """Flat rank-one connection with holonomy targets[l] around the l-th H₁ basis loop.

    Transport is T(e) = Π_l t_l^{z_l(e)} for the integral basis z dual to the cycles, i.e.
    e^{−A} with A = −Σ_l log(t_l) z_l; integer exponents keep exact targets exact.
    """
    lattice = h1_lattice_inclusion(surface.nerve())
    targets = [as_scalar(t, mode) for t in targets]
    if len(targets) != len(lattice.z_basis):
        raise SchemaError(f"expected {len(lattice.z_basis)} targets (rank of H₁), got {len(targets)}")
    if any(is_zero(t) for t in targets):
        raise SchemaError("holonomy targets must be nonzero")
    scalars = [Matrix.from_rows([[t]], mode) for t in targets]
    transport = {}
    for e in surface.edges:
        value = Matrix.identity(1, mode)
        for scalar, z in zip(scalars, lattice.z_basis):
            exponent = int(z.values[e])
            if exponent:
                value = value @ scalar.power(exponent)
        transport[e] = value
    return LatticeConnection(surface, transport)


# ============================================================
# 5. CANONICAL SURFACE LOOPS
# ============================================================
def _cotree(surface: TriangulatedSurface, tree_edges) -> dict[int, tuple[int, Edge]]:
    """Spanning tree of the dual graph through the edges outside the primal tree.

    Maps every face except face 0 to (parent face, shared edge), in breadth-first order.
    """
    faces_of: dict[Edge, list[int]] = {}
    for index, triangle in enumerate(surface.triangles):
        for u, v in _boundary_edges(triangle):
            faces_of.setdefault(_sorted_edge(u, v), []).append(index)
    dual = nx.Graph()
    dual.add_nodes_from(range(len(surface.triangles)))
    for edge, faces in faces_of.items():
        if edge not in tree_edges and len(faces) == 2:
            dual.add_edge(*faces, edge=edge)
    if not nx.is_connected(dual):
        raise SchemaError("the faces do not form a connected surface")
    return {child: (parent, dual.edges[parent, child]["edge"]) for parent, child in nx.bfs_edges(dual, 0)}


def _disc_boundary(surface: TriangulatedSurface, glued: set) -> list[int]:
    """Vertex sequence around the disc obtained by gluing the faces along `glued` edges."""
    following = {}
    for a, b, c in surface.triangles:
        following[(a, b)], following[(b, c)], following[(c, a)] = (b, c), (c, a), (a, b)
    boundary = sorted(h for h in following if _sorted_edge(*h) not in glued)
    start = current = boundary[0]
    vertices = [start[0]]
    visited = 0
    while True:
        vertices.append(current[1])
        visited += 1
        step = following[current]
        while _sorted_edge(*step) in glued:
            step = following[(step[1], step[0])]
        current = step
        if current == start:
            break
    if visited != len(boundary):
        raise SchemaError(f"cut surface is not a disc ({visited} of {len(boundary)} boundary edges reached)")
    return vertices


def _replace(word: Word, generator: int, image: Word) -> Word:
    letters = []
    for g, s in word.letters:
        if g != generator:
            letters.append((g, s))
        else:
            letters.extend((image if s > 0 else image.inverse()).letters)
    return Word(tuple(letters)).reduced()


class _HandleNormaliser:
    """A one-relator word under generator substitutions, brought to Π[a_i, b_i].

    `forward[x]` is the current generator x written in the original generators and
    `backward[o]` is original generator o written in the current ones.
    """

    def __init__(self, relator: Word):
        letters = list(relator.reduced().letters)
        while len(letters) > 1 and letters[0] == (letters[-1][0], -letters[-1][1]):
            letters = letters[1:-1]
        self.relator = Word(tuple(letters))
        generators = sorted({g for g, _ in letters})
        self.forward = {g: Word.generator(g) for g in generators}
        self.backward = {g: Word.generator(g) for g in generators}
        self.handles: list[tuple[int, int]] = []

    def _expand(self, word: Word) -> Word:
        expanded = Word()
        for g, s in word.letters:
            expanded = expanded * (self.forward[g] if s > 0 else self.forward[g].inverse())
        return expanded

    def substitute(self, x: int, left: Word, right: Word):
        """Old x becomes left · x · right."""
        image = left * Word.generator(x) * right
        self.forward[x] = (self._expand(left).inverse() * self.forward[x] * self._expand(right).inverse()).reduced()
        self.relator = _replace(self.relator, x, image)
        self.backward = {o: _replace(w, x, image) for o, w in self.backward.items()}

    def flip(self, x: int):
        image = Word.generator(x, -1)
        self.forward[x] = self.forward[x].inverse()
        self.relator = _replace(self.relator, x, image)
        self.backward = {o: _replace(w, x, image) for o, w in self.backward.items()}

    def _linked_pair(self, start: int) -> tuple[int, int]:
        tail = self.relator.letters[start:]
        where: dict[int, list[int]] = {}
        for position, (g, s) in enumerate(tail):
            where.setdefault(g, []).append(position)
        for g, positions in where.items():
            if len(positions) != 2 or tail[positions[0]][1] == tail[positions[1]][1]:
                raise SchemaError(f"generator {g} does not occur once with each sign; surface is not orientable")
        for g, (i, j) in sorted(where.items(), key=lambda item: item[1][0]):
            for h, (p, q) in where.items():
                if i < p < j < q:
                    return g, h
        raise SchemaError("boundary word has no interlinked pair of generators")

    def normalise(self):
        while 4 * len(self.handles) < len(self.relator):
            offset = 4 * len(self.handles)
            a, b = self._linked_pair(offset)
            letters = self.relator.letters
            if letters[[g for g, _ in letters].index(a, offset)][1] < 0:
                self.flip(a)
            letters = self.relator.letters
            ia, ja = [k for k, (g, _) in enumerate(letters) if g == a]
            ib = next(k for k, (g, _) in enumerate(letters) if g == b and ia < k < ja)
            if letters[ib][1] < 0:
                self.flip(b)

            # relator = K · S0 · a P b Q a⁻¹ R b⁻¹ · S1 with K the finished handles
            letters = self.relator.letters
            ia, ja = [k for k, (g, _) in enumerate(letters) if g == a]
            ib, jb = [k for k, (g, _) in enumerate(letters) if g == b]
            s0, p, q, r = (Word(letters[lo:hi]) for lo, hi in ((offset, ia), (ia + 1, ib), (ib + 1, ja), (ja + 1, jb)))
            self.substitute(a, Word(), p.inverse())
            self.substitute(b, Word(), (q * p).inverse())
            m = r * q * p
            self.substitute(a, m, Word())
            z = (s0 * m).inverse()
            self.substitute(a, z, z.inverse())
            self.substitute(b, z, z.inverse())

            block = self.relator.letters[offset:offset + 4]
            if block != ((a, 1), (b, 1), (a, -1), (b, -1)):
                raise SchemaError(f"handle normalisation failed at handle {len(self.handles) + 1}")
            self.handles.append((a, b))


@dataclass(frozen=True, eq=False)
class CanonicalLoops:
    """Based loops A₁, B₁, …, A_g, B_g with Π[A_i, B_i] = 1 in π₁.

    `loops` are words in the edge-path generators of `presentation`; `cut_words` gives each
    edge-path generator off the tree and cotree as a word in the surface-group generators.
    """

    presentation: Pi1Presentation
    loops: tuple[Word, ...]
    cut_words: Mapping[int, Word]
    cotree: Mapping[int, tuple[int, Edge]]

    @property
    def genus(self) -> int:
        return len(self.loops) // 2

    def to_json(self) -> dict:
        names = [f"{kind}{i}" for i in range(1, self.genus + 1) for kind in ("A", "B")]
        return {
            "basepoint": self.presentation.basepoint,
            "order": names,
            "loops": [w.to_json() for w in self.loops],
        }


def canonical_loops(surface: TriangulatedSurface, basepoint: int = 0) -> CanonicalLoops:
    """Cut along a tree and a dual cotree, then normalise the disc's boundary word.

    The loops are ordered (A₁, B₁, …, A_g, B_g) and satisfy the surface-group relator.
    """
    genus = surface.genus
    if genus is None:
        raise SchemaError("canonical loops need a closed, consistently oriented surface")
    presentation = pi1_presentation(surface.nerve(), basepoint)
    if genus == 0:
        return CanonicalLoops(presentation, (), MappingProxyType({}), MappingProxyType({}))
    cotree = _cotree(surface, presentation.tree_edges)
    glued = {edge for _, edge in cotree.values()}
    relator = presentation.path_word(_disc_boundary(surface, glued))

    normaliser = _HandleNormaliser(relator)
    normaliser.normalise()
    if len(normaliser.handles) != genus:
        raise SchemaError(f"found {len(normaliser.handles)} handles on a genus-{genus} surface")

    renumber = {}
    for i, (a, b) in enumerate(normaliser.handles):
        renumber[a], renumber[b] = 2 * i + 1, 2 * i + 2
    loops = tuple(normaliser.forward[x] for handle in normaliser.handles for x in handle)
    cut_words = {
        o: Word(tuple((renumber[g], s) for g, s in w.letters)) for o, w in sorted(normaliser.backward.items())
    }
    logger.debug("canonical loops: genus %d, word lengths %s", genus, [len(w) for w in loops])
    return CanonicalLoops(presentation, loops, MappingProxyType(cut_words), MappingProxyType(cotree))


def surface_monodromy(conn: LatticeConnection, basepoint: int = 0, tol: float = DEFAULT_TOL) -> Representation:
    """Holonomy of a flat connection around the canonical loops, as a surface-group representation."""
    canonical = canonical_loops(conn.surface, basepoint)
    rep = monodromy_rep(conn, basepoint, tol)
    images = tuple(evaluate_word(rep, word) for word in canonical.loops)
    return validate(Representation(surface_group(canonical.genus), images), tol)


def connection_from_surface_rep(surface: TriangulatedSurface, rep: Representation,
                                basepoint: int = 0, tol: float = DEFAULT_TOL) -> LatticeConnection:
    """A flat connection whose canonical-loop holonomy is `rep`.

    Tree edges carry the identity, cut edges the image of their surface-group word, and
    the cotree edges are solved face by face from the leaves of the dual tree inwards.
    """
    canonical = canonical_loops(surface, basepoint)
    if not rep.group.same_presentation(surface_group(canonical.genus)):
        raise GenusMismatch(f"representation is not of the genus-{canonical.genus} surface group")
    validate(rep, tol)
    presentation = canonical.presentation
    known = {e: Matrix.identity(rep.rank, rep.mode) for e in presentation.tree_edges}
    for generator, word in canonical.cut_words.items():
        known[presentation.generators[generator - 1]] = evaluate_word(rep, word)

    def lookup(u: int, v: int) -> Matrix:
        return known[(u, v)] if (u, v) in known else known[(v, u)].inverse()

    for face in reversed(list(canonical.cotree)):
        _, shared = canonical.cotree[face]
        a, b, c = surface.triangles[face]
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            if _sorted_edge(u, v) == shared:
                known[(u, v)] = (lookup(v, w) @ lookup(w, u)).inverse()
                break
    conn = LatticeConnection(surface, known)
    _require_flat(conn, tol)
    return conn
