import cmath

import pytest
import sympy

from src.betti import Representation, check_relations, evaluate_word, surface_group
from src.errors import (
    BrokenPath,
    DegreeTooHigh,
    DimensionMismatch,
    GenusMismatch,
    InvalidGenus,
    NotFlat,
    RankNotOne,
    SchemaError,
)
from src.lattice import (
    DiscreteForm,
    LatticeConnection,
    TriangulatedSurface,
    abelian_connection,
    abelian_moduli,
    canonical_loops,
    connection_from_form,
    connection_from_surface_rep,
    curvature,
    d,
    gauge_act,
    holonomy,
    holonomy_along,
    is_flat,
    monodromy_rep,
    surface_monodromy,
)
from src.localsys import abelian_representation, pi1_presentation, rep_to_cocycle
from src.numkit import Matrix, Mode

from tests.conftest import commuting_pair, random_gaussian_rational, random_invertible


def test_standard_surfaces(torus, genus2):
    assert torus.is_closed and torus.is_consistently_oriented
    assert (torus.euler_characteristic, torus.genus) == (0, 1)
    assert len(torus.edges) == 21
    assert (genus2.vertex_count, genus2.euler_characteristic, genus2.genus) == (11, -2, 2)
    assert TriangulatedSurface.tetrahedron().genus == 0
    annulus = TriangulatedSurface.annulus()
    assert annulus.has_boundary and annulus.euler_characteristic == 0 and annulus.genus is None


def test_genus_three_tower():
    surface = TriangulatedSurface.of_genus(3)
    assert surface.genus == 3 and surface.is_consistently_oriented


def test_declared_genus_is_checked(torus):
    with pytest.raises(GenusMismatch):
        TriangulatedSurface(7, torus.triangles, declared_genus=2)
    with pytest.raises(InvalidGenus):
        TriangulatedSurface.of_genus(-1)


def test_d_squared_is_zero(torus, rng):
    f = DiscreteForm(torus, 0, {v: random_gaussian_rational(rng, True) for v in range(7)})
    ddf = d(d(f))
    assert all(value == 0 for value in ddf.values.values())
    with pytest.raises(DegreeTooHigh):
        d(ddf)


def test_one_form_is_odd(torus):
    values = {e: k for k, e in enumerate(torus.edges)}
    form = DiscreteForm(torus, 1, values)
    u, v = torus.edges[3]
    assert form.at(v, u) == -form.at(u, v)


def random_connection(surface, rng):
    return LatticeConnection(surface, {e: random_invertible(rng) for e in surface.edges})


def test_curvature_is_gauge_covariant(torus, rng):
    conn = random_connection(torus, rng)
    faces = curvature(conn)
    for _ in range(10):
        g = {v: random_invertible(rng) for v in range(torus.vertex_count)}
        gauged = curvature(gauge_act(g, conn))
        for t, value in faces.items():
            base = min(t)
            assert gauged[t].equals(g[base].inverse() @ value @ g[base])


def flat_connection(surface, rng):
    """Commuting holonomies on the H₁ basis, then a random nonabelian gauge."""
    nerve = surface.nerve()
    p = pi1_presentation(nerve)
    a, b = commuting_pair(rng)
    cocycle = rep_to_cocycle(abelian_representation(p, [a, b]), p)
    conn = LatticeConnection(surface, dict(cocycle.transitions))
    return gauge_act({v: random_invertible(rng) for v in range(surface.vertex_count)}, conn)


def _third_vertices(surface, u, v):
    return [w for t in surface.triangles if u in t and v in t for w in t if w not in (u, v)]


def homotopy_move(surface, path, rng):
    """One elementary move: push an edge across a face, pull two edges back, or add/remove a spike."""
    i = rng.randrange(len(path) - 1)
    u, v = path[i], path[i + 1]
    choice = rng.randrange(4)
    if choice == 0:
        w = rng.choice(_third_vertices(surface, u, v))
        return path[: i + 1] + [w] + path[i + 1:]
    if choice == 1 and i + 2 < len(path):
        w = path[i + 2]
        if w != u and v in _third_vertices(surface, u, w):
            return path[: i + 1] + path[i + 2:]
    if choice == 2:
        return path[: i + 1] + [v, u] + path[i + 1:]
    if choice == 3 and i + 2 < len(path) and path[i + 2] == u:
        return path[: i + 1] + path[i + 3:]
    return path


def test_flat_holonomy_is_homotopy_invariant(torus, rng):
    conn = flat_connection(torus, rng)
    assert is_flat(conn)
    path = [0, 1, 2, 3, 4, 5, 6, 0]
    reference = holonomy_along(conn, path)
    for _ in range(100):
        path = homotopy_move(torus, path, rng)
        assert path[0] == 0 and path[-1] == 0
        assert holonomy_along(conn, path).equals(reference)


def test_non_flat_face_gives_path_dependence(torus):
    transport = {e: Matrix.identity(1) for e in torus.edges}
    transport[(0, 1)] = Matrix.from_rows([[2]])
    conn = LatticeConnection(torus, transport)
    assert not is_flat(conn)
    direct = holonomy(conn, [(0, 1)])
    around = holonomy(conn, [(0, 3), (3, 1)])
    assert direct[0, 0] == 2 and around[0, 0] == 1
    with pytest.raises(NotFlat):
        abelian_moduli(conn)


def test_broken_paths(torus):
    conn = LatticeConnection.trivial(torus)
    with pytest.raises(BrokenPath):
        holonomy(conn, [(0, 1), (2, 3)])
    annulus = LatticeConnection.trivial(TriangulatedSurface.annulus())
    with pytest.raises(BrokenPath):
        holonomy(annulus, [(0, 5)])


@pytest.mark.parametrize("surface_fixture", ["torus", "genus2"])
def test_abelian_connection_hits_targets(surface_fixture, request, rng):
    surface = request.getfixturevalue(surface_fixture)
    k = 2 * surface.genus
    for _ in range(3):
        targets = [random_gaussian_rational(rng) for _ in range(k)]
        conn = abelian_connection(surface, targets)
        assert is_flat(conn)
        assert all(sympy.expand(a - b) == 0 for a, b in zip(abelian_moduli(conn), targets))


def test_abelian_moduli_needs_rank_one(torus):
    with pytest.raises(RankNotOne):
        abelian_moduli(LatticeConnection.trivial(torus, rank=2))


def test_exact_form_gives_trivial_holonomy(torus, rng):
    f = DiscreteForm(torus, 0, {v: rng.uniform(-1, 1) for v in range(7)}, Mode.FLOAT)
    conn = connection_from_form(d(f))
    assert is_flat(conn, 1e-12)
    assert all(abs(h - 1) < 1e-12 for h in abelian_moduli(conn, 1e-12))


def test_flat_connection_monodromy_is_a_representation(torus, rng):
    rep = monodromy_rep(flat_connection(torus, rng), basepoint=3)
    assert check_relations(rep)


def test_rank_one_curvature_is_exp_of_minus_dA(torus, rng):
    form = DiscreteForm(torus, 1, {e: complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for e in torus.edges}, Mode.FLOAT)
    faces = curvature(connection_from_form(form))
    dA = d(form)
    for t, value in faces.items():
        assert abs(value[0, 0] - cmath.exp(-dA.at(t))) < 1e-12


def test_single_face_curvature_and_path_dependence():
    face = TriangulatedSurface(3, [(0, 1, 2)])
    conn = LatticeConnection(face, {
        (0, 1): Matrix.from_rows([[2]]),
        (1, 2): Matrix.from_rows([[3]]),
        (2, 0): Matrix.from_rows([["1/5"]]),
    })
    assert curvature(conn)[(0, 1, 2)][0, 0] == sympy.Rational(6, 5)
    assert not is_flat(conn)
    via_one = holonomy(conn, [(0, 1), (1, 2)])[0, 0]
    direct = holonomy(conn, [(0, 2)])[0, 0]
    assert via_one / direct == sympy.Rational(6, 5)


# ============================================================
# CANONICAL LOOPS
# ============================================================
def handle_pair_images():
    """X, Y with [X, Y][Y, X] = 1 and XY ≠ YX."""
    x = Matrix.from_rows([[1, 1], [0, 1]])
    y = Matrix.from_rows([[2, 0], [0, 1]])
    return x, y


def relator_value(rep, loops):
    value = Matrix.identity(rep.rank, rep.mode)
    for a, b in zip(loops[0::2], loops[1::2]):
        value = value @ evaluate_word(rep, a * b * a.inverse() * b.inverse())
    return value


@pytest.mark.parametrize("genus", [1, 2, 3])
def test_canonical_loops_are_ordered_handles(genus):
    surface = TriangulatedSurface.of_genus(genus)
    canonical = canonical_loops(surface)
    assert canonical.genus == genus
    assert canonical.to_json()["order"][:2] == ["A1", "B1"]
    assert len(canonical.loops) == 2 * genus
    assert len(canonical.cut_words) == 2 * genus
    assert len(canonical.cotree) == len(surface.triangles) - 1


def test_nonabelian_flat_connection_on_genus_two(genus2):
    x, y = handle_pair_images()
    rep = Representation(surface_group(2), (x, y, y, x))
    conn = connection_from_surface_rep(genus2, rep)
    assert is_flat(conn)

    edge_path = monodromy_rep(conn)
    assert check_relations(edge_path)
    assert any(not (a @ b).equals(b @ a) for a in edge_path.images for b in edge_path.images)

    canonical = canonical_loops(genus2)
    assert relator_value(edge_path, canonical.loops).is_identity()
    recovered = surface_monodromy(conn)
    assert all(r.equals(m) for r, m in zip(recovered.images, rep.images))


def test_three_handles_with_a_commuting_pair():
    surface = TriangulatedSurface.of_genus(3)
    x, y = handle_pair_images()
    m = Matrix.from_rows([[0, 1], [-1, 0]])
    rep = Representation(surface_group(3), (x, y, y, x, m, m))
    recovered = surface_monodromy(connection_from_surface_rep(surface, rep))
    assert all(r.equals(v) for r, v in zip(recovered.images, rep.images))


def test_surface_monodromy_is_conjugated_by_a_gauge(genus2, rng):
    x, y = handle_pair_images()
    conn = connection_from_surface_rep(genus2, Representation(surface_group(2), (x, y, y, x)))
    g = {v: random_invertible(rng) for v in range(genus2.vertex_count)}
    before = surface_monodromy(conn, basepoint=0)
    after = surface_monodromy(gauge_act(g, conn), basepoint=0)
    for b, a in zip(before.images, after.images):
        assert a.equals(g[0].inverse() @ b @ g[0])


def test_abelian_connections_satisfy_the_surface_relator(torus, rng):
    conn = flat_connection(torus, rng)
    rep = surface_monodromy(conn, basepoint=2)
    assert check_relations(rep)
    assert relator_value(monodromy_rep(conn, basepoint=2), canonical_loops(torus, 2).loops).is_identity()


def test_surface_rep_must_match_the_genus(torus):
    with pytest.raises(GenusMismatch):
        connection_from_surface_rep(torus, Representation.trivial(surface_group(2), 1))
    with pytest.raises(SchemaError):
        canonical_loops(TriangulatedSurface.annulus())


def test_non_square_transport_is_a_dimension_error(torus):
    transport = {e: Matrix.identity(1) for e in torus.edges}
    transport[(0, 1)] = Matrix.from_rows([[1, 0, 0], [0, 1, 0]])
    with pytest.raises(DimensionMismatch):
        LatticeConnection(torus, transport)
    reversed_key = {(v, u) if (u, v) == (0, 1) else (u, v): m for (u, v), m in transport.items()}
    with pytest.raises(DimensionMismatch):
        LatticeConnection(torus, reversed_key)
