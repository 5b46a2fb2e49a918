import cmath

import numpy as np
import pytest
import sympy

from src.errors import DimensionMismatch, DimensionTooLarge, ModeMismatch, SchemaError, SingularMatrix
from src.numkit import (
    Matrix,
    Mode,
    as_scalar,
    eigenvalues,
    exact_scalar,
    mat_exp,
    scalar_to_json,
    smith_normal_form,
)

from tests.conftest import random_gaussian_rational


def test_exact_scalar_accepts_gaussian_rationals():
    assert exact_scalar("3/4") == sympy.Rational(3, 4)
    assert exact_scalar({"re": "1/2", "im": -2}) == sympy.Rational(1, 2) - 2 * sympy.I
    assert exact_scalar(0.25) == sympy.Rational(1, 4)


def test_exact_scalar_rejects_irrationals():
    with pytest.raises(SchemaError):
        exact_scalar(sympy.sqrt(2))
    with pytest.raises(SchemaError):
        exact_scalar(True)


def test_scalar_json_forms():
    assert scalar_to_json(sympy.Rational(-1, 3)) == "-1/3"
    assert scalar_to_json(sympy.Rational(1, 2) + sympy.I) == {"re": "1/2", "im": "1"}
    assert scalar_to_json(1.5 - 2j) == {"re": 1.5, "im": -2.0}


def test_exact_inverse_and_identity():
    m = Matrix.from_rows([[2, 1], [1, 1]])
    assert (m @ m.inverse()).is_identity()
    assert m.det() == 1
    assert (m.power(-2) @ m.power(2)).is_identity()


def test_singular_inverse_raises():
    with pytest.raises(SingularMatrix):
        Matrix.from_rows([[1, 2], [2, 4]]).inverse()
    with pytest.raises(SingularMatrix):
        Matrix.from_rows([[1e-300, 0], [0, 0]], Mode.FLOAT).inverse()


def test_mixed_modes_are_rejected():
    exact = Matrix.identity(2)
    floating = Matrix.identity(2, Mode.FLOAT)
    with pytest.raises(ModeMismatch):
        exact @ floating


def test_ragged_rows_are_a_schema_error():
    with pytest.raises(SchemaError):
        Matrix.from_rows([[1, 2], [3]])


def test_float_equality_respects_tolerance():
    a = Matrix.from_rows([[1.0, 0.0], [0.0, 1.0]], Mode.FLOAT)
    b = Matrix.from_rows([[1.0 + 1e-12, 0.0], [0.0, 1.0]], Mode.FLOAT)
    assert a.equals(b, 1e-9)
    assert not a.equals(b, 1e-15)


def test_smith_normal_form_transforms():
    m = sympy.Matrix([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    smith = smith_normal_form(m)
    assert smith.diagonal == (2, 6, 12)
    product = smith.left * m * smith.right
    assert product == sympy.diag(*smith.diagonal)
    assert smith.left * smith.left_inverse == sympy.eye(3)
    assert smith.right * smith.right_inverse == sympy.eye(3)


def test_smith_normal_form_rectangular_and_rank():
    smith = smith_normal_form([[1, 1, 0], [0, 1, 1]])
    assert smith.rank == 2
    assert all(d in (0, 1) for d in smith.diagonal)


@pytest.mark.parametrize(
    "rows, expected",
    [
        ([[2, 0], [0, 3]], [2, 3]),
        ([[0, -1], [1, 0]], [-1j, 1j]),
        ([[1, 1], [0, 1]], [1, 1]),
    ],
)
def test_exact_eigenvalues(rows, expected):
    values = eigenvalues(Matrix.from_rows(rows))
    assert sorted(values, key=lambda z: (z.real, z.imag)) == pytest.approx(
        sorted(expected, key=lambda z: (complex(z).real, complex(z).imag))
    )


def test_float_eigenvalues_match_numpy():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    ours = sorted(eigenvalues(Matrix.from_numpy(a)), key=lambda z: (z.real, z.imag))
    reference = sorted(np.linalg.eigvals(a), key=lambda z: (z.real, z.imag))
    assert np.allclose(ours, reference, atol=1e-8)


def test_eigenvalue_dimension_cap():
    with pytest.raises(DimensionTooLarge):
        eigenvalues(Matrix.identity(5))


def test_mat_exp_float_only():
    rotation = Matrix.from_rows([[0, -cmath.pi], [cmath.pi, 0]], Mode.FLOAT)
    assert mat_exp(rotation).equals(Matrix.from_rows([[-1, 0], [0, -1]], Mode.FLOAT), 1e-12)
    with pytest.raises(ModeMismatch):
        mat_exp(Matrix.identity(2))


def test_as_scalar_switches_on_mode():
    assert as_scalar("1/2", Mode.EXACT) == sympy.Rational(1, 2)
    assert as_scalar("1/2", Mode.FLOAT) == 0.5


def test_shape_errors_are_dimension_mismatches():
    wide = Matrix.from_rows([[1, 0, 0], [0, 1, 0]])
    with pytest.raises(DimensionMismatch):
        wide.size
    with pytest.raises(DimensionMismatch):
        Matrix.identity(2) @ Matrix.identity(3)
    with pytest.raises(SchemaError):
        Matrix.identity(2) @ Matrix.identity(3)


def test_smith_normal_form_of_coprime_diagonal():
    assert smith_normal_form([[2, 0], [0, 3]]).diagonal == (1, 6)


# ============================================================
# EIGENVALUES
# ============================================================
def test_close_eigenvalues_are_not_merged():
    values = eigenvalues(Matrix.diagonal([1.0, 1.0 + 1e-7], Mode.FLOAT), tol=1e-9)
    assert abs(values[0] - 1.0) < 1e-9
    assert abs(values[1] - (1.0 + 1e-7)) < 1e-9


def test_jordan_block_keeps_its_double_eigenvalue():
    values = eigenvalues(Matrix.from_rows([[1, 1], [0, 1]], Mode.FLOAT), tol=1e-9)
    assert all(abs(v - 1) < 1e-8 for v in values)
    assert len(values) == 2


def test_eigenvalues_sum_to_trace_and_multiply_to_det():
    rng = np.random.default_rng(29)
    for size in (2, 3, 4):
        a = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        m = Matrix.from_numpy(a)
        values = eigenvalues(m)
        assert abs(sum(values) - m.trace()) < 1e-9
        assert abs(np.prod(values) - m.det()) < 1e-8 * (1 + abs(m.det()))


def test_exact_determinant_is_multiplicative(rng):
    for _ in range(5):
        a, b = (
            Matrix.from_rows([[random_gaussian_rational(rng, True) for _ in range(3)] for _ in range(3)])
            for _ in range(2)
        )
        assert sympy.expand((a @ b).det() - a.det() * b.det()) == 0


# ============================================================
# EXPONENTIAL
# ============================================================
@pytest.mark.parametrize("t", [0.5, -2.0, 3 + 1j])
def test_mat_exp_of_nilpotent_is_truncated_series(t):
    nilpotent = Matrix.from_rows([[0, t], [0, 0]], Mode.FLOAT)
    assert mat_exp(nilpotent).equals(Matrix.from_rows([[1, t], [0, 1]], Mode.FLOAT), 1e-12)


def test_mat_exp_of_negation_is_the_inverse():
    rng = np.random.default_rng(31)
    for _ in range(5):
        m = Matrix.from_numpy(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        assert (mat_exp(m) @ mat_exp(-m)).equals(Matrix.identity(3, Mode.FLOAT), 1e-9)
