"""
Scalar and matrix arithmetic shared by every module.

Two modes are supported and never mixed implicitly:

* exact: Gaussian rationals a + b*I (a, b ∈ ℚ) held as expanded sympy numbers.
* float: numpy complex128.

Exact mode never rounds; float mode only ever compares through an explicit tolerance.
"""
import logging
import numbers
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
import sympy
from scipy import linalg

from src.errors import DimensionMismatch, DimensionTooLarge, ModeMismatch, SchemaError, SingularMatrix
from src.utils import DEFAULT_TOL, SNAP_TOL

logger = logging.getLogger(__name__)

MAX_EIGEN_DIMENSION = 4
CLUSTER_RADIUS = 1e-6
DEFECT_THRESHOLD = 1e-6


class Mode(str, Enum):
    EXACT = "exact"
    FLOAT = "float"


# ============================================================
# 1. SCALARS
# ============================================================
def snap(value: float, tolerance: float = SNAP_TOL) -> sympy.Rational:
    """Rationalise a float; the result is within `tolerance` of the input."""
    if not np.isfinite(value):
        raise SchemaError(f"cannot rationalise non-finite value {value!r}")
    snapped = sympy.nsimplify(value, tolerance=tolerance, rational=True)
    if abs(float(snapped) - value) > max(tolerance, abs(value) * tolerance):
        snapped = sympy.Rational(Fraction(value).limit_denominator(10**12))
    return sympy.Rational(snapped)


def _is_gaussian_rational(expr) -> bool:
    if not getattr(expr, "is_number", False):
        return False
    re_part, im_part = sympy.re(expr), sympy.im(expr)
    return bool(re_part.is_Rational and im_part.is_Rational)


def exact_scalar(value) -> sympy.Expr:
    """Coerce a value into the canonical exact form a + b*I."""
    if isinstance(value, bool):
        raise SchemaError("booleans are not scalars")
    if isinstance(value, dict):
        try:
            return sympy.expand(exact_scalar(value["re"]) + sympy.I * exact_scalar(value.get("im", 0)))
        except KeyError as exc:
            raise SchemaError(f"complex scalar needs 're' (and optional 'im'): {value!r}") from exc
    if isinstance(value, sympy.Basic):
        expr = sympy.expand(value)
    elif isinstance(value, numbers.Integral):
        return sympy.Integer(int(value))
    elif isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    elif isinstance(value, str):
        try:
            expr = sympy.Rational(value.strip())
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"not a rational literal: {value!r}") from exc
    elif isinstance(value, numbers.Real):
        expr = snap(float(value))
    elif isinstance(value, numbers.Complex):
        value = complex(value)
        expr = snap(value.real) + sympy.I * snap(value.imag)
    else:
        raise SchemaError(f"unsupported scalar {value!r}")
    expr = sympy.expand(expr)
    if not _is_gaussian_rational(expr):
        raise SchemaError(f"{expr} is not a Gaussian rational")
    return expr


def float_scalar(value) -> complex:
    if isinstance(value, bool):
        raise SchemaError("booleans are not scalars")
    if isinstance(value, dict):
        try:
            return complex(float_scalar(value["re"]) + 1j * float_scalar(value.get("im", 0.0)))
        except KeyError as exc:
            raise SchemaError(f"complex scalar needs 're' (and optional 'im'): {value!r}") from exc
    if isinstance(value, str):
        return complex(exact_scalar(value))
    if isinstance(value, (numbers.Complex, sympy.Basic)):
        return complex(value)
    raise SchemaError(f"unsupported scalar {value!r}")


def as_scalar(value, mode: Mode):
    return exact_scalar(value) if mode is Mode.EXACT else float_scalar(value)


def mode_of(value) -> Mode:
    return Mode.EXACT if isinstance(value, sympy.Basic) else Mode.FLOAT


def reciprocal(value):
    """1/z, staying inside ℚ(i) for exact values."""
    if isinstance(value, sympy.Basic):
        re_part, im_part = sympy.re(value), sympy.im(value)
        norm = re_part**2 + im_part**2
        if norm == 0:
            raise ZeroDivisionError("reciprocal of zero")
        return sympy.expand((re_part - sympy.I * im_part) / norm)
    return 1.0 / complex(value)


def is_zero(value, tol: float = 0.0) -> bool:
    if isinstance(value, sympy.Basic):
        return sympy.expand(value) == 0
    return abs(complex(value)) <= tol


def scalar_to_json(value):
    """Exact: "p/q" for reals, {"re": "p/q", "im": "r/s"} otherwise. Float: {"re", "im"} doubles."""
    if isinstance(value, sympy.Basic):
        re_part, im_part = sympy.re(value), sympy.im(value)
        if im_part == 0:
            return str(re_part)
        return {"re": str(re_part), "im": str(im_part)}
    value = complex(value)
    return {"re": value.real, "im": value.imag}


# ============================================================
# 2. MATRICES
# ============================================================
def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


class Matrix:
    """Immutable complex matrix in exact or float mode."""

    __slots__ = ("_data", "_mode")

    def __init__(self, data, mode: Mode):
        self._data = data
        self._mode = mode

    # ------------------------------
    # Construction
    # ------------------------------
    @classmethod
    def from_rows(cls, rows, mode: Mode = Mode.EXACT) -> "Matrix":
        rows = [list(row) for row in rows]
        if not rows or not rows[0]:
            raise SchemaError("matrix must have at least one row and one column")
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise SchemaError("ragged matrix rows")
        if mode is Mode.EXACT:
            data = sympy.ImmutableMatrix([[exact_scalar(x) for x in row] for row in rows])
            return cls(data, mode)
        return cls(_frozen([[float_scalar(x) for x in row] for row in rows]), mode)

    @classmethod
    def from_numpy(cls, array) -> "Matrix":
        array = np.atleast_2d(np.asarray(array, dtype=complex))
        return cls(_frozen(array), Mode.FLOAT)

    @classmethod
    def identity(cls, size: int, mode: Mode = Mode.EXACT) -> "Matrix":
        if mode is Mode.EXACT:
            return cls(sympy.ImmutableMatrix(sympy.eye(size)), mode)
        return cls(_frozen(np.eye(size)), mode)

    @classmethod
    def diagonal(cls, entries, mode: Mode = Mode.EXACT) -> "Matrix":
        entries = list(entries)
        size = len(entries)
        rows = [[entries[i] if i == j else 0 for j in range(size)] for i in range(size)]
        return cls.from_rows(rows, mode)

    @classmethod
    def scalar(cls, value, mode: Mode = Mode.EXACT) -> "Matrix":
        return cls.from_rows([[value]], mode)

    # ------------------------------
    # Accessors
    # ------------------------------
    @property
    def mode(self) -> Mode:
        return self._mode

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self._data.shape)

    @property
    def size(self) -> int:
        rows, cols = self.shape
        if rows != cols:
            raise DimensionMismatch(f"matrix of shape {self.shape} is not square")
        return rows

    def __getitem__(self, index):
        value = self._data[index]
        return value if self._mode is Mode.EXACT else complex(value)

    def rows(self) -> list[list]:
        n_rows, n_cols = self.shape
        return [[self[i, j] for j in range(n_cols)] for i in range(n_rows)]

    def to_numpy(self) -> np.ndarray:
        if self._mode is Mode.FLOAT:
            return np.array(self._data, dtype=complex)
        return np.array([[complex(x) for x in row] for row in self.rows()], dtype=complex)

    def as_sympy(self) -> sympy.ImmutableMatrix:
        if self._mode is Mode.EXACT:
            return self._data
        return sympy.ImmutableMatrix([[sympy.nsimplify(x) for x in row] for row in self.rows()])

    def to_float(self) -> "Matrix":
        if self._mode is Mode.FLOAT:
            return self
        return Matrix(_frozen(self.to_numpy()), Mode.FLOAT)

    def to_exact(self) -> "Matrix":
        if self._mode is Mode.EXACT:
            return self
        return Matrix.from_rows(self.rows(), Mode.EXACT)

    def to_json(self) -> list[list]:
        return [[scalar_to_json(x) for x in row] for row in self.rows()]

    @classmethod
    def from_json(cls, grid, mode: Mode) -> "Matrix":
        if not isinstance(grid, list) or not all(isinstance(row, list) for row in grid):
            raise SchemaError("matrix must be a list of rows")
        return cls.from_rows(grid, mode)

    def __repr__(self) -> str:
        return f"Matrix({self.rows()!r}, mode={self._mode.value})"

    # ------------------------------
    # Arithmetic
    # ------------------------------
    def _coerce(self, other) -> "Matrix":
        if not isinstance(other, Matrix):
            raise TypeError(f"expected Matrix, got {type(other).__name__}")
        if other._mode is not self._mode:
            raise ModeMismatch(f"cannot combine {self._mode.value} and {other._mode.value} matrices")
        return other

    def __matmul__(self, other: "Matrix") -> "Matrix":
        other = self._coerce(other)
        if self.shape[1] != other.shape[0]:
            raise DimensionMismatch(f"shape mismatch {self.shape} @ {other.shape}")
        if self._mode is Mode.EXACT:
            return Matrix((self._data * other._data).applyfunc(sympy.expand), self._mode)
        return Matrix(_frozen(self._data @ other._data), self._mode)

    def __add__(self, other: "Matrix") -> "Matrix":
        other = self._coerce(other)
        if self._mode is Mode.EXACT:
            return Matrix((self._data + other._data).applyfunc(sympy.expand), self._mode)
        return Matrix(_frozen(self._data + other._data), self._mode)

    def __sub__(self, other: "Matrix") -> "Matrix":
        other = self._coerce(other)
        if self._mode is Mode.EXACT:
            return Matrix((self._data - other._data).applyfunc(sympy.expand), self._mode)
        return Matrix(_frozen(self._data - other._data), self._mode)

    def __neg__(self) -> "Matrix":
        return self.scale(-1)

    def scale(self, factor) -> "Matrix":
        if self._mode is Mode.EXACT:
            factor = exact_scalar(factor)
            return Matrix(self._data.applyfunc(lambda x: sympy.expand(factor * x)), self._mode)
        return Matrix(_frozen(self._data * complex(factor)), self._mode)

    def det(self):
        self.size
        if self._mode is Mode.EXACT:
            return sympy.expand(self._data.det(method="berkowitz"))
        return complex(np.linalg.det(self._data))

    def trace(self):
        self.size
        if self._mode is Mode.EXACT:
            return sympy.expand(self._data.trace())
        return complex(np.trace(self._data))

    def is_invertible(self, tol: float = 0.0) -> bool:
        det = self.det()
        if self._mode is Mode.EXACT:
            return det != 0
        return abs(det) > tol

    def inverse(self) -> "Matrix":
        size = self.size
        if self._mode is Mode.EXACT:
            det = self.det()
            if det == 0:
                raise SingularMatrix("matrix has zero determinant")
            inv_det = reciprocal(det)
            if size == 1:
                return Matrix(sympy.ImmutableMatrix([[inv_det]]), self._mode)
            adjugate = self._data.adjugate()
            return Matrix(adjugate.applyfunc(lambda x: sympy.expand(x * inv_det)), self._mode)
        try:
            inverse = np.linalg.inv(self._data)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrix(str(exc)) from exc
        if not np.all(np.isfinite(inverse)):
            raise SingularMatrix("inverse is not finite")
        return Matrix(_frozen(inverse), self._mode)

    def power(self, exponent: int) -> "Matrix":
        if exponent < 0:
            return self.inverse().power(-exponent)
        result = Matrix.identity(self.size, self._mode)
        base = self
        while exponent:
            if exponent & 1:
                result = result @ base
            base = base @ base
            exponent >>= 1
        return result

    def conjugate_by(self, g: "Matrix") -> "Matrix":
        """g · self · g⁻¹."""
        return g @ self @ g.inverse()

    # ------------------------------
    # Comparisons
    # ------------------------------
    def distance(self, other: "Matrix") -> float:
        """Operator 2-norm of the difference, as a float."""
        other = self._coerce(other)
        return float(np.linalg.norm(self.to_numpy() - other.to_numpy(), 2))

    def equals(self, other: "Matrix", tol: float = 0.0) -> bool:
        other = self._coerce(other)
        if self.shape != other.shape:
            return False
        if self._mode is Mode.EXACT:
            return all(sympy.expand(x) == 0 for x in (self._data - other._data))
        return self.distance(other) <= tol

    def is_identity(self, tol: float = 0.0) -> bool:
        return self.equals(Matrix.identity(self.size, self._mode), tol)

    def is_scalar(self, tol: float = 0.0) -> bool:
        size = self.size
        return self.equals(Matrix.identity(size, self._mode).scale(self.trace() / size), tol)


# ============================================================
# 3. SMITH NORMAL FORM OVER ℤ
# ============================================================
@dataclass(frozen=True)
class SmithForm:
    """left · m · right = diag(diagonal) with d₁ | d₂ | …; the inverses are tracked alongside."""

    diagonal: tuple[int, ...]
    left: sympy.ImmutableMatrix
    right: sympy.ImmutableMatrix
    left_inverse: sympy.ImmutableMatrix
    right_inverse: sympy.ImmutableMatrix

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)


def _to_int_rows(m) -> tuple[list[list[int]], int, int]:
    if hasattr(m, "shape"):
        n_rows, n_cols = (int(x) for x in m.shape)
        rows = [[int(m[i, j]) for j in range(n_cols)] for i in range(n_rows)]
        return rows, n_rows, n_cols
    rows = [[int(x) for x in row] for row in m]
    return rows, len(rows), len(rows[0]) if rows else 0


def _eye_rows(size: int) -> list[list[int]]:
    return [[int(i == j) for j in range(size)] for i in range(size)]


def _immutable(rows: list[list[int]], n_rows: int, n_cols: int) -> sympy.ImmutableMatrix:
    return sympy.ImmutableMatrix(n_rows, n_cols, [x for row in rows for x in row])


def smith_normal_form(m) -> SmithForm:
    """Smith normal form of an integer matrix with unimodular transforms.

    Accepts a sympy matrix, a numpy integer array, or a list of integer rows.
    """
    a, n_rows, n_cols = _to_int_rows(m)
    left, left_inv = _eye_rows(n_rows), _eye_rows(n_rows)
    right, right_inv = _eye_rows(n_cols), _eye_rows(n_cols)

    def swap_rows(i, j):
        if i == j:
            return
        a[i], a[j] = a[j], a[i]
        left[i], left[j] = left[j], left[i]
        for row in left_inv:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, q):
        # row_dst += q * row_src
        if q == 0:
            return
        a[dst] = [x + q * y for x, y in zip(a[dst], a[src])]
        left[dst] = [x + q * y for x, y in zip(left[dst], left[src])]
        for row in left_inv:
            row[src] -= q * row[dst]

    def negate_row(i):
        a[i] = [-x for x in a[i]]
        left[i] = [-x for x in left[i]]
        for row in left_inv:
            row[i] = -row[i]

    def swap_cols(i, j):
        if i == j:
            return
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in right:
            row[i], row[j] = row[j], row[i]
        right_inv[i], right_inv[j] = right_inv[j], right_inv[i]

    def add_col(src, dst, q):
        # col_dst += q * col_src
        if q == 0:
            return
        for row in a:
            row[dst] += q * row[src]
        for row in right:
            row[dst] += q * row[src]
        right_inv[src] = [x - q * y for x, y in zip(right_inv[src], right_inv[dst])]

    for s in range(min(n_rows, n_cols)):
        block = [(abs(a[i][j]), i, j) for i in range(s, n_rows) for j in range(s, n_cols) if a[i][j]]
        if not block:
            break
        _, i, j = min(block)
        swap_rows(s, i)
        swap_cols(s, j)

        while True:
            line = [(abs(a[k][s]), k, s) for k in range(s, n_rows) if a[k][s]]
            line += [(abs(a[s][k]), s, k) for k in range(s + 1, n_cols) if a[s][k]]
            _, i, j = min(line)
            swap_rows(s, i)
            swap_cols(s, j)

            pivot = a[s][s]
            for k in range(s + 1, n_rows):
                add_row(s, k, -(a[k][s] // pivot))
            for k in range(s + 1, n_cols):
                add_col(s, k, -(a[s][k] // pivot))

            if any(a[k][s] for k in range(s + 1, n_rows)) or any(a[s][k] for k in range(s + 1, n_cols)):
                continue

            # divisibility chain: every later entry must be a multiple of the pivot
            offender = next(
                (k for k in range(s + 1, n_rows) for l in range(s + 1, n_cols) if a[k][l] % pivot),
                None,
            )
            if offender is None:
                break
            add_row(offender, s, 1)

        if a[s][s] < 0:
            negate_row(s)

    diagonal = tuple(a[i][i] for i in range(min(n_rows, n_cols)))
    return SmithForm(
        diagonal=diagonal,
        left=_immutable(left, n_rows, n_rows),
        right=_immutable(right, n_cols, n_cols),
        left_inverse=_immutable(left_inv, n_rows, n_rows),
        right_inverse=_immutable(right_inv, n_cols, n_cols),
    )


# ============================================================
# 4. EIGENVALUES AND EXPONENTIAL
# ============================================================
def charpoly_coefficients(m: Matrix) -> list:
    """Characteristic polynomial coefficients of an exact matrix, highest degree first (Berkowitz)."""
    lam = sympy.Symbol("lam")
    return [sympy.expand(c) for c in m.to_exact()._data.charpoly(lam).all_coeffs()]


def _defective_clusters(values: np.ndarray, vectors: np.ndarray) -> list[complex]:
    # a defective eigenvalue comes back split by ~sqrt(eps) with nearly parallel eigenvectors;
    # close but distinct eigenvalues keep independent eigenvectors and are left alone
    scale = 1.0 + max((abs(v) for v in values), default=0.0)
    radius = CLUSTER_RADIUS * scale
    merged = [complex(v) for v in values]
    remaining = list(range(len(values)))
    while remaining:
        seed = remaining.pop(0)
        members = [seed] + [k for k in remaining if abs(values[k] - values[seed]) < radius]
        remaining = [k for k in remaining if k not in members]
        if len(members) < 2:
            continue
        singular = np.linalg.svd(vectors[:, members], compute_uv=False)
        if singular[-1] < DEFECT_THRESHOLD:
            mean = complex(np.mean(values[members]))
            for k in members:
                merged[k] = mean
    return merged


def sort_complex(values) -> list[complex]:
    return sorted((complex(v) for v in values), key=lambda z: (round(z.real, 9), round(z.imag, 9)))


def eigenvalues(m: Matrix, tol: float = DEFAULT_TOL) -> list[complex]:
    """Eigenvalues (with multiplicity) of a square matrix of size at most 4.

    Exact matrices go through sympy's closed-form roots. Float matrices are diagonalised
    directly by LAPACK; only defective clusters are averaged, so every returned value stays
    within rounding of a true eigenvalue.
    """
    size = m.size
    if size > MAX_EIGEN_DIMENSION:
        raise DimensionTooLarge(f"eigenvalues limited to size {MAX_EIGEN_DIMENSION}, got {size}")

    if m.mode is Mode.EXACT:
        lam = sympy.Symbol("lam")
        coeffs = charpoly_coefficients(m)
        poly = sum(c * lam ** (size - k) for k, c in enumerate(coeffs))
        found = sympy.roots(sympy.Poly(poly, lam))
        if sum(found.values()) == size:
            values = []
            for root, multiplicity in found.items():
                values.extend([complex(sympy.N(root, 30))] * multiplicity)
            return sort_complex(values)
        logger.debug("closed-form roots incomplete, falling back to float eigenvalues")
        m = m.to_float()

    a = m.to_numpy()
    found, vectors = np.linalg.eig(a)
    values = _defective_clusters(found, vectors)
    identity = np.eye(size)
    residual = max((np.linalg.svd(a - v * identity, compute_uv=False)[-1] for v in values), default=0.0)
    if residual > max(tol, 1e-12) * (1.0 + np.linalg.norm(a, 2)):
        logger.debug("eigenvalue residual %.3e above tolerance %.1e", residual, tol)
    return sort_complex(values)


def mat_exp(m: Matrix, tol: float = DEFAULT_TOL) -> Matrix:
    """Matrix exponential (scipy's scaling-and-squaring Padé scheme); float mode only."""
    if m.mode is not Mode.FLOAT:
        raise ModeMismatch("mat_exp works in float mode; convert with to_float() first")
    a = m.to_numpy()
    result = linalg.expm(a)
    inverse_check = np.linalg.norm(result @ linalg.expm(-a) - np.eye(a.shape[0]), 2)
    if inverse_check > 100 * tol * (1.0 + np.linalg.norm(a, 2)):
        logger.warning("⚠️ expm(m)·expm(-m) deviates from identity by %.3e", inverse_check)
    return Matrix.from_numpy(result)
