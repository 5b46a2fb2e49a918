import itertools
import random
from pathlib import Path

import pytest
import sympy

from src.cech import Coefficients, Cochain, CoverNerve, is_cocycle
from src.lattice import TriangulatedSurface
from src.numkit import Matrix

DATA = Path(__file__).resolve().parent.parent / "data"

RP2_TRIANGLES = [
    [0, 1, 4], [0, 1, 5], [0, 2, 3], [0, 2, 4], [0, 3, 5],
    [1, 2, 3], [1, 2, 5], [1, 3, 4], [2, 4, 5], [3, 4, 5],
]


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def torus() -> TriangulatedSurface:
    return TriangulatedSurface.torus()


@pytest.fixture
def genus2() -> TriangulatedSurface:
    return TriangulatedSurface.of_genus(2)


@pytest.fixture
def torus_nerve(torus) -> CoverNerve:
    return torus.nerve()


@pytest.fixture
def rp2_nerve() -> CoverNerve:
    return CoverNerve.from_maximal(6, RP2_TRIANGLES)


@pytest.fixture
def sphere_nerve() -> CoverNerve:
    return TriangulatedSurface.tetrahedron().nerve()


@pytest.fixture
def triangle_nerve() -> CoverNerve:
    """Hollow triangle: a circle with π₁ = ℤ."""
    return CoverNerve.from_maximal(3, [[0, 1], [1, 2], [0, 2]])


@pytest.fixture
def wedge_nerve() -> CoverNerve:
    """One filled triangle (0, 1, 2) and two open loops through 3 and 4: π₁ is free of rank two."""
    return CoverNerve.from_maximal(5, [[0, 1, 2], [1, 3], [2, 3], [0, 4], [2, 4]])


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240611)


def random_gaussian_rational(rng: random.Random, allow_zero: bool = False):
    while True:
        value = sympy.Rational(rng.randint(-9, 9), rng.randint(1, 5)) + sympy.I * sympy.Rational(
            rng.randint(-9, 9), rng.randint(1, 5)
        )
        if allow_zero or value != 0:
            return value


def sign_cocycle(nerve: CoverNerve) -> Cochain:
    """First ±1 cocycle (in edge order) that is not the coboundary of a ±1 vertex function."""
    edges = nerve.simplices_of(1)
    coboundaries = set()
    for signs in itertools.product((1, -1), repeat=nerve.size):
        coboundaries.add(tuple(signs[i] * signs[j] for i, j in edges))
    index = {e: k for k, e in enumerate(edges)}
    faces = [(index[(i, j)], index[(j, k)], index[(i, k)]) for i, j, k in nerve.simplices_of(2)]
    for values in itertools.product((1, -1), repeat=len(edges)):
        if values in coboundaries:
            continue
        if all(values[a] * values[b] * values[c] == 1 for a, b, c in faces):
            candidate = Cochain(nerve, 1, Coefficients.CX, dict(zip(edges, values)))
            assert is_cocycle(candidate)
            return candidate
    raise AssertionError("no non-trivial sign cocycle")


def random_invertible(rng: random.Random, size: int = 2) -> Matrix:
    while True:
        m = Matrix.from_rows([[random_gaussian_rational(rng, True) for _ in range(size)] for _ in range(size)])
        if m.is_invertible():
            return m


def commuting_pair(rng: random.Random) -> tuple[Matrix, Matrix]:
    """Two invertible polynomials in one random matrix."""
    base = random_invertible(rng)
    while True:
        a = Matrix.identity(2).scale(random_gaussian_rational(rng)) + base
        b = Matrix.identity(2).scale(random_gaussian_rational(rng)) + base.scale(random_gaussian_rational(rng))
        if a.is_invertible() and b.is_invertible():
            return a, b
