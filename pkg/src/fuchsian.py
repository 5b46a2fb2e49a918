"""
Monodromy of Fuchsian systems  dF/dz + (A₀/z + A₁/(z−1)) F = 0  on ℙ¹ ∖ {0, 1, ∞}.

Transport matrices satisfy F(end) = U · F(start); a path followed by another composes
as U₂ · U₁. Loops are built from the hub −r:

* C₀: counterclockwise circle |z| = r.
* C₁: down to the lower half plane, across to 1 − r, counterclockwise circle around 1, back.
* C_∞: out to −R along the real axis, clockwise circle |z| = R (positive around ∞), back.

With these loops C₀ · C₁ · C_∞ = id; C_∞ is integrated on its own so the identity is a check.
"""
import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import permutations
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from src.errors import DimensionMismatch, PoleTooClose, ResonantSystem, SchemaError, StepUnderflow, ZeroLambda
from src.numkit import Matrix, Mode, eigenvalues
from src.utils import DEFAULT_BASE, DEFAULT_RADIUS, DEFAULT_TOL, OUTER_RADIUS, thread_cap

logger = logging.getLogger(__name__)

POLES = (0j, 1 + 0j)
INTEGER_TOL = 1e-9
LIOUVILLE_FLOOR = 1e-9


def liouville_bound(tol: float) -> float:
    """Largest relative det(U) deviation accepted at integration tolerance `tol`."""
    return max(1000 * tol, LIOUVILLE_FLOOR)


# ============================================================
# 1. SYSTEMS
# ============================================================
@dataclass(frozen=True, eq=False)
class FuchsianSystem:
    """Residues A₀, A₁ (float); λ ≠ 1 means the λ-system λF′ + (A₀/z + A₁/(z−1))F = 0."""

    a0: Matrix
    a1: Matrix
    lam: complex = 1.0
    _a0: np.ndarray = field(init=False, repr=False)
    _a1: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a0, a1 = self.a0.to_float(), self.a1.to_float()
        if a0.shape != a1.shape or a0.shape[0] != a0.shape[1]:
            raise DimensionMismatch(f"A0 and A1 must be square of one size, got {a0.shape} and {a1.shape}")
        lam = complex(self.lam)
        if lam == 0:
            raise ZeroLambda("λ = 0 has no monodromy to compute")
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "_a0", a0.to_numpy())
        object.__setattr__(self, "_a1", a1.to_numpy())

    @classmethod
    def scalar(cls, a0: complex, a1: complex, lam: complex = 1.0) -> "FuchsianSystem":
        return cls(Matrix.from_rows([[a0]], Mode.FLOAT), Matrix.from_rows([[a1]], Mode.FLOAT), lam)

    @property
    def rank(self) -> int:
        return self.a0.shape[0]

    @property
    def a_inf(self) -> Matrix:
        return -(self.a0 + self.a1)

    def residue(self, point: str) -> Matrix:
        table = {"0": self.a0, "1": self.a1, "inf": self.a_inf}
        if point not in table:
            raise SchemaError(f"singular point must be one of {sorted(table)}, got {point!r}")
        return table[point]

    def with_lambda(self, lam: complex) -> "FuchsianSystem":
        return FuchsianSystem(self.a0, self.a1, lam)

    def coefficient(self, z: complex) -> np.ndarray:
        """M(z) with F′ = M(z) F."""
        return -(self._a0 / z + self._a1 / (z - 1)) / self.lam

    def to_json(self) -> dict:
        return {"rank": self.rank, "A0": self.a0.to_json(), "A1": self.a1.to_json()}


def lambda_rescale(system: FuchsianSystem, lam: complex) -> FuchsianSystem:
    """The ordinary (λ = 1) system equivalent to `system.with_lambda(lam)`.

    ∇^λ = λD + A is equivalent to D + A/λ. The residues are read as A; the system's own λ
    is replaced, so rescaling twice by λ and μ divides by λμ.
    """
    lam = complex(lam)
    if lam == 0:
        raise ZeroLambda("λ = 0 is the Dolbeault degeneration; rescaling needs λ ≠ 0")
    return FuchsianSystem(system.a0.scale(1.0 / lam), system.a1.scale(1.0 / lam), 1.0)


def local_exponents(system: FuchsianSystem, point: str, tol: float = DEFAULT_TOL) -> list[complex]:
    """Indicial roots: local solutions behave like (z − p)^μ with μ ∈ −eig(residue)/λ."""
    return sorted(
        (-mu / system.lam for mu in eigenvalues(system.residue(point), tol)),
        key=lambda z: (round(z.real, 9), round(z.imag, 9)),
    )


# ============================================================
# 2. PATHS
# ============================================================
@dataclass(frozen=True)
class Segment:
    start: complex
    end: complex

    def point(self, t: float) -> complex:
        return self.start + t * (self.end - self.start)

    def velocity(self, t: float) -> complex:
        return self.end - self.start

    def distance_to(self, p: complex) -> float:
        d = self.end - self.start
        if d == 0:
            return abs(p - self.start)
        t = min(1.0, max(0.0, ((p - self.start) * d.conjugate()).real / abs(d) ** 2))
        return abs(self.point(t) - p)

    def log_increment(self, p: complex) -> complex:
        """∫ dz / (z − p) along the segment."""
        return cmath.log((self.end - p) / (self.start - p))

    def reversed(self) -> "Segment":
        return Segment(self.end, self.start)


@dataclass(frozen=True)
class Circle:
    """Whole turns around `center`; turns > 0 is counterclockwise."""

    center: complex
    radius: float
    start_angle: float
    turns: int = 1

    def point(self, t: float) -> complex:
        return self.center + self.radius * cmath.exp(1j * (self.start_angle + 2 * math.pi * self.turns * t))

    def velocity(self, t: float) -> complex:
        return 2j * math.pi * self.turns * (self.point(t) - self.center)

    def distance_to(self, p: complex) -> float:
        return abs(abs(p - self.center) - self.radius)

    def log_increment(self, p: complex) -> complex:
        return 2j * math.pi * self.turns if abs(p - self.center) < self.radius else 0j

    def reversed(self) -> "Circle":
        return Circle(self.center, self.radius, self.start_angle, -self.turns)


Piece = Union[Segment, Circle]


def polyline(points: Sequence[complex]) -> list[Segment]:
    points = [complex(p) for p in points]
    return [Segment(a, b) for a, b in zip(points, points[1:])]


def reverse_path(pieces: Sequence[Piece]) -> list[Piece]:
    return [p.reversed() for p in reversed(pieces)]


# ============================================================
# 3. TRANSPORT
# ============================================================
@dataclass(frozen=True)
class TransportResult:
    matrix: Matrix
    liouville_error: float


def _transport_piece(system: FuchsianSystem, piece: Piece, tol: float) -> np.ndarray:
    r = system.rank

    def rhs(t, y):
        f = y.reshape(r, r)
        return (system.coefficient(piece.point(t)) @ f * piece.velocity(t)).ravel()

    solution = solve_ivp(
        rhs, (0.0, 1.0), np.eye(r, dtype=complex).ravel(), method="DOP853", rtol=tol, atol=tol
    )
    if solution.status == -1 or not solution.success:
        raise StepUnderflow(f"integration failed on {piece}: {solution.message}")
    return solution.y[:, -1].reshape(r, r)


def transport(system: FuchsianSystem, pieces: Sequence[Piece], tol: float = DEFAULT_TOL,
              guard: float = DEFAULT_RADIUS / 2) -> TransportResult:
    """U with F(end) = U · F(start), plus the Liouville determinant check."""
    if tol <= 0:
        raise SchemaError("integration tolerance must be positive")
    for piece in pieces:
        for pole in POLES:
            if piece.distance_to(pole) < guard:
                raise PoleTooClose(f"{piece} passes within {piece.distance_to(pole):.3e} of {pole}")

    u = np.eye(system.rank, dtype=complex)
    for piece in pieces:
        u = _transport_piece(system, piece, tol) @ u

    windings = [sum((piece.log_increment(p) for piece in pieces), 0j) for p in POLES]
    trace0, trace1 = np.trace(system._a0), np.trace(system._a1)
    expected = cmath.exp(-(trace0 * windings[0] + trace1 * windings[1]) / system.lam)
    error = abs(np.linalg.det(u) - expected) / max(1.0, abs(expected))
    if error > liouville_bound(tol):
        logger.warning("⚠️ Liouville check off by %.3e (tol %.1e)", error, tol)
    return TransportResult(Matrix.from_numpy(u), float(error))


def integrate(system: FuchsianSystem, path: Sequence[complex], tol: float = DEFAULT_TOL) -> Matrix:
    """Transport along a polyline of complex points."""
    return transport(system, polyline(path), tol).matrix


# ============================================================
# 4. MONODROMY
# ============================================================
class LoopKind(str, Enum):
    AROUND_0 = "around0"
    AROUND_1 = "around1"
    AROUND_INFINITY = "aroundInfinity"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LoopSpec:
    basepoint: complex = DEFAULT_BASE
    kind: LoopKind = LoopKind.AROUND_0
    radius: float = DEFAULT_RADIUS
    outer_radius: float = OUTER_RADIUS
    points: tuple[complex, ...] = ()

    def __post_init__(self):
        if not 0 < self.radius < 0.5:
            raise SchemaError(f"loop radius must lie in (0, 1/2), got {self.radius}")
        if self.outer_radius <= 1 + self.radius:
            raise SchemaError("outer radius must enclose both finite poles")
        if self.kind is LoopKind.CUSTOM and len(self.points) < 2:
            raise SchemaError("custom loops need at least two points")

    @property
    def hub(self) -> complex:
        return complex(-self.radius)

    def pieces(self) -> list[Piece]:
        r, hub = self.radius, self.hub
        if self.kind is LoopKind.CUSTOM:
            return polyline(self.points)
        if self.kind is LoopKind.AROUND_0:
            loop: list[Piece] = [Circle(0j, r, math.pi, 1)]
        elif self.kind is LoopKind.AROUND_1:
            approach = polyline([hub, hub - 1j * r, 1 - r - 1j * r, 1 - r])
            loop = approach + [Circle(1 + 0j, r, math.pi, 1)] + reverse_path(approach)
        else:
            approach = [Segment(hub, complex(-self.outer_radius))]
            loop = approach + [Circle(0j, self.outer_radius, math.pi, -1)] + reverse_path(approach)
        base = complex(self.basepoint)
        if base == hub:
            return loop
        lead = [Segment(base, hub)]
        return lead + loop + reverse_path(lead)


@dataclass(frozen=True)
class MonodromyResult:
    c0: Matrix
    c1: Matrix
    cinf: Matrix
    residual_identity_error: float
    integration_tolerance: float
    basepoint: complex = DEFAULT_BASE
    radius: float = DEFAULT_RADIUS
    liouville_errors: dict = field(default_factory=dict)

    def matrices(self) -> dict[str, Matrix]:
        return {"0": self.c0, "1": self.c1, "inf": self.cinf}

    @property
    def liouville_passed(self) -> bool:
        """det C agrees with exp(−tr ∮ A dz / λ) on every loop."""
        bound = liouville_bound(self.integration_tolerance)
        return all(error <= bound for error in self.liouville_errors.values())

    def to_json(self) -> dict:
        return {
            "C0": self.c0.to_json(),
            "C1": self.c1.to_json(),
            "Cinf": self.cinf.to_json(),
            "residualIdentityError": self.residual_identity_error,
            "integrationTolerance": self.integration_tolerance,
            "basepoint": {"re": self.basepoint.real, "im": self.basepoint.imag},
            "radius": self.radius,
            "liouvilleErrors": dict(sorted(self.liouville_errors.items())),
            "composition": "C0·C1·Cinf",
        }


def monodromy(system: FuchsianSystem, base: complex = DEFAULT_BASE, tol: float = DEFAULT_TOL,
              radius: float = DEFAULT_RADIUS, outer_radius: float = OUTER_RADIUS,
              workers: Optional[int] = None) -> MonodromyResult:
    base = complex(base)
    for pole in POLES:
        if abs(base - pole) < radius / 2:
            raise PoleTooClose(f"basepoint {base} is within {radius / 2} of the pole {pole}")

    specs = {
        kind: LoopSpec(base, kind, radius, outer_radius)
        for kind in (LoopKind.AROUND_0, LoopKind.AROUND_1, LoopKind.AROUND_INFINITY)
    }

    def run(kind: LoopKind) -> TransportResult:
        return transport(system, specs[kind].pieces(), tol, guard=radius / 2)

    workers = workers or thread_cap()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(specs))) as pool:
            results = dict(zip(specs, pool.map(run, specs)))
    else:
        results = {kind: run(kind) for kind in specs}

    c0, c1, cinf = (results[k].matrix for k in specs)
    product = c0 @ c1 @ cinf
    residual = product.distance(Matrix.identity(system.rank, Mode.FLOAT))
    logger.info("monodromy residual ‖C0·C1·Cinf − id‖ = %.3e", residual)
    return MonodromyResult(
        c0, c1, cinf, residual, tol, base, radius,
        {kind.value: results[kind].liouville_error for kind in specs},
    )


# ============================================================
# 5. EIGENVALUE CHECK
# ============================================================
def _is_resonant(values: Sequence[complex]) -> bool:
    for i, a in enumerate(values):
        for b in values[i + 1:]:
            gap = a - b
            nearest = round(gap.real)
            if nearest != 0 and abs(gap - nearest) < INTEGER_TOL:
                return True
    return False


def _multiset_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    return min(max((abs(x - y) for x, y in zip(a, perm)), default=0.0) for perm in permutations(b))


@dataclass(frozen=True)
class EigenvalueComparison:
    point: str
    predicted: tuple[complex, ...]
    observed: tuple[complex, ...]
    distance: float
    resonant: bool
    passed: bool


@dataclass(frozen=True)
class EigenvalueCheck:
    comparisons: tuple[EigenvalueComparison, ...]
    tolerance: float

    @property
    def resonant(self) -> bool:
        return any(c.resonant for c in self.comparisons)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)

    def to_json(self) -> dict:
        def encode(values):
            return [{"re": z.real, "im": z.imag} for z in values]

        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "resonant": self.resonant,
            "points": {
                c.point: {
                    "predicted": encode(c.predicted),
                    "observed": encode(c.observed),
                    "distance": c.distance,
                    "resonant": c.resonant,
                    "passed": c.passed,
                }
                for c in self.comparisons
            },
        }


def eigenvalue_check(system: FuchsianSystem, result: MonodromyResult, tol: float = 1e-6,
                     strict: bool = False) -> EigenvalueCheck:
    """eig(C_p) against exp(−2πi·μ/λ) for μ ∈ eig(A_p); resonant points are reported, not asserted."""
    comparisons = []
    for point, observed_matrix in result.matrices().items():
        residue_eigs = [mu / system.lam for mu in eigenvalues(system.residue(point), tol)]
        predicted = [cmath.exp(-2j * math.pi * mu) for mu in residue_eigs]
        observed = eigenvalues(observed_matrix, tol)
        resonant = _is_resonant(residue_eigs)
        distance = _multiset_distance(predicted, observed)
        if resonant:
            logger.warning("⚠️ residue at %s is resonant; eigenvalue comparison not asserted", point)
            if strict:
                raise ResonantSystem(f"eigenvalues of the residue at {point} differ by a nonzero integer")
        comparisons.append(
            EigenvalueComparison(point, tuple(predicted), tuple(observed), distance, resonant,
                                 resonant or distance <= tol)
        )
    return EigenvalueCheck(tuple(comparisons), tol)


# ============================================================
# 6. HYPERGEOMETRIC EQUATION
# ============================================================
@dataclass(frozen=True)
class HypergeometricParams:
    """z(1−z) f″ + (c − (a+b+1) z) f′ − ab f = 0."""

    a: complex
    b: complex
    c: complex

    def __post_init__(self):
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, complex(getattr(self, name)))

    @staticmethod
    def _integral(value: complex) -> bool:
        return abs(value - round(value.real)) < INTEGER_TOL

    @property
    def resonant_at_0(self) -> bool:
        return self._integral(self.c)

    @property
    def resonant_at_1(self) -> bool:
        return self._integral(self.c - self.a - self.b)

    @property
    def resonant_at_infinity(self) -> bool:
        return self._integral(self.a - self.b)

    @property
    def is_resonant(self) -> bool:
        return self.resonant_at_0 or self.resonant_at_1 or self.resonant_at_infinity

    def flags(self) -> dict[str, bool]:
        return {"0": self.resonant_at_0, "1": self.resonant_at_1, "inf": self.resonant_at_infinity}


def hypergeometric_to_system(params: HypergeometricParams) -> FuchsianSystem:
    """First-order system for F = (f, z f′) (the θ = z d/dz substitution)."""
    a, b, c = params.a, params.b, params.c
    a0 = Matrix.from_rows([[0, -1], [0, c - 1]], Mode.FLOAT)
    a1 = Matrix.from_rows([[0, 0], [a * b, a + b - c + 1]], Mode.FLOAT)
    return FuchsianSystem(a0, a1)


def hypergeometric_residual(params: HypergeometricParams, start: complex = 0.5j,
                            end: complex = 0.5 + 0.5j, tol: float = 1e-12, step: float = 0.02) -> float:
    """Scaled residual of the Euler equation for the first component of a system solution.

    Derivatives come from five-point stencils on the dense output, not from the system itself.
    """
    system = hypergeometric_to_system(params)
    segment = Segment(complex(start), complex(end))

    def rhs(t, y):
        return system.coefficient(segment.point(t)) @ y * segment.velocity(t)

    solution = solve_ivp(
        rhs, (0.0, 1.0), np.array([1.0 + 0j, 0.5 + 0.25j]), method="DOP853",
        rtol=tol, atol=tol, dense_output=True,
    )
    if not solution.success:
        raise StepUnderflow(solution.message)

    def f(t):
        return solution.sol(t)[0]

    a, b, c = params.a, params.b, params.c
    v = segment.velocity(0.0)
    h = step
    worst = 0.0
    for t in np.linspace(0.2, 0.8, 7):
        samples = [f(t + k * h) for k in (-2, -1, 0, 1, 2)]
        d1 = (samples[0] - 8 * samples[1] + 8 * samples[3] - samples[4]) / (12 * h) / v
        d2 = (-samples[0] + 16 * samples[1] - 30 * samples[2] + 16 * samples[3] - samples[4]) / (12 * h * h) / v**2
        z = segment.point(t)
        terms = (z * (1 - z) * d2, (c - (a + b + 1) * z) * d1, -a * b * samples[2])
        scale = max(1.0, *(abs(term) for term in terms))
        worst = max(worst, abs(sum(terms)) / scale)
    logger.debug("hypergeometric residual %.3e for %s", worst, params)
    return float(worst)
