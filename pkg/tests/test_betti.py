import pytest
import sympy

from src.betti import (
    FpGroup,
    ReductivityStatus,
    Representation,
    Word,
    check_relations,
    conjugate,
    evaluate_word,
    reductivity,
    surface_group,
    trace_invariants,
    validate,
)
from src.equivalences import standard_words
from src.errors import IndexOutOfRange, InvalidGenus, RelationViolation, SingularMatrix
from src.numkit import Matrix, Mode

from tests.conftest import random_gaussian_rational


def unipotent(genus: int) -> Representation:
    images = [Matrix.from_rows([[1, 1], [0, 1]])] + [Matrix.identity(2)] * (2 * genus - 1)
    return Representation(surface_group(genus), tuple(images))


def test_surface_group_relator():
    group = surface_group(2)
    assert group.num_generators == 4
    assert group.relators[0].to_json() == [[1, 1], [2, 1], [1, -1], [2, -1], [3, 1], [4, 1], [3, -1], [4, -1]]


def test_surface_group_needs_positive_genus():
    with pytest.raises(InvalidGenus):
        surface_group(0)


def test_relator_index_is_checked():
    with pytest.raises(IndexOutOfRange):
        FpGroup(1, (Word(((2, 1),)),))


def test_word_reduction_and_inverse():
    word = Word(((1, 1), (2, 1), (2, -1), (3, -1)))
    assert word.reduced().letters == ((1, 1), (3, -1))
    assert (word * word.inverse()).reduced().letters == ()


def test_trivial_representation_satisfies_relations():
    rep = Representation.trivial(surface_group(3), 2)
    assert check_relations(rep)
    assert validate(rep) is rep


def test_noncommuting_torus_images_violate_relation():
    a = Matrix.from_rows([[1, 1], [0, 1]])
    b = Matrix.from_rows([[1, 0], [1, 1]])
    rep = Representation(surface_group(1), (a, b))
    assert not check_relations(rep)
    with pytest.raises(RelationViolation):
        validate(rep)


def test_images_must_be_invertible():
    with pytest.raises(SingularMatrix):
        Representation(surface_group(1), (Matrix.from_rows([[1, 0], [0, 0]]), Matrix.identity(2)))


def test_evaluate_word_multiplies_left_to_right():
    a = Matrix.from_rows([[1, 1], [0, 1]])
    b = Matrix.from_rows([[2, 0], [0, 1]])
    rep = Representation(FpGroup(2), (a, b))
    assert evaluate_word(rep, Word(((1, 1), (2, 1)))).equals(a @ b)
    assert evaluate_word(rep, Word(((2, -1),))).equals(b.inverse())


def test_traces_are_conjugation_invariant(rng):
    group = surface_group(1)
    x = Matrix.from_rows([[random_gaussian_rational(rng), 0], [0, random_gaussian_rational(rng)]])
    rep = Representation(group, (x, x.power(2)))
    g = Matrix.from_rows([[2, 1], [1, 1]])
    words = standard_words(group)
    before = trace_invariants(rep, words)
    after = trace_invariants(conjugate(rep, g), words)
    assert all(sympy.expand(p - q) == 0 for p, q in zip(before, after))


def test_unipotent_representation_is_not_reductive():
    for genus in (1, 2):
        rep = unipotent(genus)
        validate(rep)
        verdict = reductivity(rep)
        assert verdict.status is ReductivityStatus.NON_REDUCTIVE
        assert verdict.check(rep)
        assert verdict.witness.to_json() == [["1"], ["0"]]


def test_unipotent_traces_equal_trivial_traces():
    rep = unipotent(2)
    trivial = Representation.trivial(rep.group, 2)
    words = standard_words(rep.group)
    assert trace_invariants(rep, words) == trace_invariants(trivial, words)


def test_diagonal_representation_splits():
    a = Matrix.diagonal([2, sympy.Rational(1, 2)])
    b = Matrix.diagonal([3, sympy.Rational(1, 3)])
    rep = Representation(surface_group(1), (a, b))
    verdict = reductivity(rep)
    assert verdict.status is ReductivityStatus.REDUCTIVE
    assert verdict.witness.shape == (2, 2)
    assert verdict.check(rep)


def test_irreducible_representation_is_reductive():
    a = Matrix.from_rows([[1, 1], [0, 1]])
    b = Matrix.from_rows([[1, 0], [1, 1]])
    rep = Representation(FpGroup(2), (a, b))
    verdict = reductivity(rep)
    assert verdict.status is ReductivityStatus.REDUCTIVE
    assert verdict.witness is None


def test_float_unipotent_is_flagged_too():
    rep = Representation(
        surface_group(1),
        (Matrix.from_rows([[1, 1e-3], [0, 1]], Mode.FLOAT), Matrix.identity(2, Mode.FLOAT)),
    )
    verdict = reductivity(rep, 1e-9)
    assert verdict.status is ReductivityStatus.NON_REDUCTIVE
    assert verdict.check(rep, 1e-9)


def test_rank_three_is_unknown():
    rep = Representation.trivial(surface_group(1), 3)
    assert reductivity(rep).status is ReductivityStatus.UNKNOWN


def test_rank_one_scalars_satisfy_every_surface_relator(rng):
    for genus in (1, 2, 3, 4):
        images = tuple(Matrix.scalar(random_gaussian_rational(rng)) for _ in range(2 * genus))
        assert check_relations(Representation(surface_group(genus), images))


def test_evaluate_word_is_multiplicative(rng):
    images = tuple(
        Matrix.from_rows([[random_gaussian_rational(rng), 1], [0, random_gaussian_rational(rng)]])
        for _ in range(3)
    )
    rep = Representation(FpGroup(3), images)
    u = Word(((1, 1), (3, -1), (2, 1)))
    v = Word(((2, -1), (1, -1), (3, 1), (3, 1)))
    assert evaluate_word(rep, u * v).equals(evaluate_word(rep, u) @ evaluate_word(rep, v))
    assert evaluate_word(rep, u * u.inverse()).is_identity()


def test_swap_and_shear_have_no_common_line():
    swap = Matrix.from_rows([[0, 1], [1, 0]])
    shear = Matrix.from_rows([[1, 1], [0, 1]])
    rep = Representation(FpGroup(2), (swap, shear))
    verdict = reductivity(rep)
    assert verdict.status is ReductivityStatus.REDUCTIVE
    assert verdict.witness is None


def test_nearly_scalar_float_image_still_splits():
    close = Matrix.diagonal([1.0, 1.0 + 1e-7], Mode.FLOAT)
    rep = Representation(surface_group(1), (close, Matrix.identity(2, Mode.FLOAT)))
    verdict = reductivity(rep, 1e-9)
    assert verdict.status is ReductivityStatus.REDUCTIVE
    assert verdict.witness.shape == (2, 2)
    assert verdict.check(rep, 1e-9)
