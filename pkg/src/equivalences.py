"""
Cross-construction checks: each route pushes data through two or more constructions of the
moduli of flat bundles and compares orbit invariants on both ends.

Routes
------
* ``betti-cech``: representation → cocycle on a nerve → monodromy representation.
* ``cech-lattice``: rank-one cocycle → Čech moduli coordinates, lattice holonomy and
  Betti monodromy on the shared H₁ basis.
* ``lambda``: monodromy of λF′ + AF = 0 against F′ + (A/λ)F = 0.
* ``punctured-disk``: rank-one system a·dz/z, its annulus connection, Čech lift and
  Betti image against e^{−2πia}.
"""
import cmath
import logging
from typing import Optional, Sequence, Union

import sympy

from src.betti import FpGroup, Representation, Word, evaluate_word, trace_invariants
from src.cech import Cochain, CoverNerve, exp_lift, h1_cycles, moduli_coordinates
from src.errors import ComplexMismatch, GenusMismatch, PresentationMismatch, ZeroLambda
from src.fuchsian import FuchsianSystem, eigenvalue_check, lambda_rescale, monodromy as fuchsian_monodromy
from src.lattice import LatticeConnection, TriangulatedSurface, abelian_connection, abelian_moduli, as_cocycle
from src.localsys import (
    GCocycle,
    abelian_representation,
    homology_words,
    monodromy,
    pi1_presentation,
    rep_to_cocycle,
)
from src.numkit import Matrix, Mode, scalar_to_json
from src.schemas import EquivalenceReport
from src.utils import DEFAULT_BASE, DEFAULT_RADIUS, DEFAULT_TOL, fingerprint

logger = logging.getLogger(__name__)

INTEGRATED_TOL = 1e-6
MODULI_TOL = 1e-10
PREFIX_LENGTH = 4


# ============================================================
# 1. HELPERS
# ============================================================
def standard_words(group: FpGroup) -> list[Word]:
    """Generators, products g_i g_j (i < j) and relator prefixes up to length 4, without repeats."""
    n = group.num_generators
    candidates = [Word.generator(i) for i in range(1, n + 1)]
    candidates += [Word.generator(i) * Word.generator(j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    for relator in group.relators:
        for length in range(1, min(PREFIX_LENGTH, len(relator)) + 1):
            candidates.append(Word(relator.letters[:length]))

    words, seen = [], set()
    for word in candidates:
        word = word.reduced()
        if len(word) and word.letters not in seen:
            seen.add(word.letters)
            words.append(word)
    return words


def _gap(a, b) -> float:
    return abs(complex(a) - complex(b))


def _exactly_equal(before: Sequence, after: Sequence) -> bool:
    return len(before) == len(after) and all(sympy.expand(a - b) == 0 for a, b in zip(before, after))


def _commute(images: Sequence[Matrix], tol: float) -> bool:
    return all(
        (a @ b).equals(b @ a, tol)
        for index, a in enumerate(images)
        for b in images[index + 1:]
    )


# ============================================================
# 2. BETTI ↔ ČECH
# ============================================================
def roundtrip_betti_cech(rep: Representation, nerve: CoverNerve, basepoint: int = 0,
                         tol: float = DEFAULT_TOL, identify_abelian: bool = True) -> EquivalenceReport:
    """rep → rep_to_cocycle → monodromy, compared on trace invariants.

    A representation of another presentation (say the surface group) is accepted when its
    images commute and there is one per H₁ basis loop: it is carried to the nerve's
    edge-path group by sending the l-th basis loop to the l-th image.
    """
    presentation = pi1_presentation(nerve, basepoint)
    details: dict = {"generators": len(presentation.generators), "relators": len(presentation.relators)}
    homology_targets = None

    if rep.group.same_presentation(presentation.group):
        source = rep
        details["identification"] = "presentation"
    elif identify_abelian and len(rep.images) == len(h1_cycles(nerve)) and _commute(rep.images, tol):
        source = abelian_representation(presentation, rep.images, tol)
        homology_targets = list(rep.images)
        details["identification"] = "abelian-h1"
    else:
        raise PresentationMismatch(
            f"representation of a {rep.group.num_generators}-generator group does not match the nerve "
            f"presentation ({len(presentation.generators)} generators) and cannot be identified through H₁"
        )

    words = standard_words(source.group)
    after_rep = monodromy(rep_to_cocycle(source, presentation), presentation, tol)
    before = trace_invariants(source, words)
    after = trace_invariants(after_rep, words)

    exact = rep.mode is Mode.EXACT
    discrepancy = max((_gap(a, b) for a, b in zip(before, after)), default=0.0)
    exact_equal = _exactly_equal(before, after) if exact else None
    if homology_targets is not None:
        recovered = [evaluate_word(after_rep, w) for w in homology_words(presentation)]
        homology_gap = max((m.distance(t) for m, t in zip(recovered, homology_targets)), default=0.0)
        details["homologyImagesRecovered"] = all(m.equals(t, tol) for m, t in zip(recovered, homology_targets))
        discrepancy = max(discrepancy, homology_gap)
        if exact:
            exact_equal = exact_equal and details["homologyImagesRecovered"]

    passed = exact_equal if exact else discrepancy < INTEGRATED_TOL
    logger.info("betti-cech round trip over %d words: discrepancy %.3e", len(words), discrepancy)
    return EquivalenceReport(
        route="betti→cech→betti",
        fingerprint=fingerprint({"rep": rep.to_json(), "group": rep.group.to_json(), "nerve": nerve.to_json()}),
        invariants_before=[scalar_to_json(v) for v in before],
        invariants_after=[scalar_to_json(v) for v in after],
        max_discrepancy=discrepancy,
        exact_equal=exact_equal,
        passed=bool(passed),
        details={**details, "words": [w.to_json() for w in words]},
    )


# ============================================================
# 3. ČECH ↔ LATTICE ↔ BETTI (RANK ONE)
# ============================================================
def roundtrip_cech_lattice(cocycle: Union[GCocycle, Cochain], nerve: CoverNerve, surface: TriangulatedSurface,
                           tol: float = DEFAULT_TOL) -> EquivalenceReport:
    """Čech moduli coordinates, lattice holonomy and Betti images of one rank-one cocycle."""
    if isinstance(cocycle, Cochain):
        cocycle = GCocycle.from_cochain(cocycle)
    surface_nerve = surface.nerve()
    if len(h1_cycles(nerve)) != len(h1_cycles(surface_nerve)):
        raise GenusMismatch(
            f"nerve has H₁ rank {len(h1_cycles(nerve))}, surface has {len(h1_cycles(surface_nerve))}"
        )
    if nerve.size != surface_nerve.size or nerve.simplices != surface_nerve.simplices:
        raise ComplexMismatch("the nerve is not the vertex-star nerve of the surface")
    if cocycle.nerve.simplices != nerve.simplices:
        raise ComplexMismatch("the cocycle lives on a different nerve")

    report_fingerprint = fingerprint({"cocycle": cocycle.to_json(), "surface": surface.to_json()})
    lift = exp_lift(cocycle.to_cochain(), tol)
    if lift is None:
        logger.warning("⚠️ cocycle has nonzero Chern class; no flat additive lift")
        return EquivalenceReport(
            route="cech→lattice→betti",
            fingerprint=report_fingerprint,
            passed=False,
            details={"reason": "nonzero Chern class"},
        )

    cech_side = moduli_coordinates(lift, tol)
    connection = LatticeConnection(surface, dict(cocycle.transitions))
    lattice_side = [complex(v) for v in abelian_moduli(connection, tol)]
    presentation = pi1_presentation(surface_nerve)
    rep = monodromy(as_cocycle(connection), presentation, tol)
    betti_side = [complex(evaluate_word(rep, w)[0, 0]) for w in homology_words(presentation)]

    discrepancy = max(
        (max(_gap(c, l), _gap(c, b)) for c, l, b in zip(cech_side, lattice_side, betti_side)),
        default=0.0,
    )
    logger.info("cech-lattice comparison on %d loops: discrepancy %.3e", len(cech_side), discrepancy)
    return EquivalenceReport(
        route="cech→lattice→betti",
        fingerprint=report_fingerprint,
        invariants_before=[scalar_to_json(v) for v in cech_side],
        invariants_after=[scalar_to_json(v) for v in lattice_side],
        max_discrepancy=discrepancy,
        passed=discrepancy < MODULI_TOL,
        details={
            "cech": [scalar_to_json(v) for v in cech_side],
            "lattice": [scalar_to_json(v) for v in lattice_side],
            "betti": [scalar_to_json(v) for v in betti_side],
        },
    )


# ============================================================
# 4. λ-RESCALING
# ============================================================
def _monodromy_gap(first, second) -> float:
    return max(
        first.matrices()[k].distance(second.matrices()[k]) for k in first.matrices()
    )


def lambda_equivalence(system: FuchsianSystem, lams: Sequence[complex], tol: float = DEFAULT_TOL,
                       base: complex = DEFAULT_BASE, radius: float = DEFAULT_RADIUS) -> EquivalenceReport:
    """Monodromy of the λ-system against the rescaled system (1, A/λ) for each λ."""
    lams = [complex(lam) for lam in lams]
    if any(lam == 0 for lam in lams):
        raise ZeroLambda("λ = 0 has no rescaled counterpart")

    before, after, runs = [], [], []
    discrepancy = 0.0
    for lam in lams:
        scaled = system.with_lambda(lam)
        direct = fuchsian_monodromy(scaled, base, tol, radius)
        rescaled = fuchsian_monodromy(lambda_rescale(system, lam), base, tol, radius)
        gap = _monodromy_gap(direct, rescaled)
        discrepancy = max(discrepancy, gap)
        before += [scalar_to_json(m.trace()) for m in direct.matrices().values()]
        after += [scalar_to_json(m.trace()) for m in rescaled.matrices().values()]
        check = eigenvalue_check(scaled, direct)
        runs.append({
            "lambda": scalar_to_json(lam),
            "discrepancy": gap,
            "eigenvalueCheck": check.to_json(),
        })
        logger.info("λ = %s: routes differ by %.3e", lam, gap)

    return EquivalenceReport(
        route="lambda-system→rescaled-system",
        fingerprint=fingerprint({"system": system.to_json(), "lambdas": [scalar_to_json(value) for value in lams]}),
        invariants_before=before,
        invariants_after=after,
        max_discrepancy=discrepancy,
        passed=discrepancy < INTEGRATED_TOL,
        details={"runs": runs},
    )


# ============================================================
# 5. PUNCTURED DISK
# ============================================================
def punctured_disk_equivalence(a: complex, tol: float = DEFAULT_TOL,
                               surface: Optional[TriangulatedSurface] = None) -> EquivalenceReport:
    """The connection a·dz/z seen four ways; every side must reproduce e^{−2πia}."""
    a = complex(a)
    closed_form = cmath.exp(-2j * cmath.pi * a)
    surface = surface or TriangulatedSurface.annulus()

    fuchsian_side = complex(fuchsian_monodromy(FuchsianSystem.scalar(a, 0), tol=tol).c0[0, 0])
    connection = abelian_connection(surface, [fuchsian_side], Mode.FLOAT)
    lattice_side = complex(abelian_moduli(connection, tol)[0])
    lift = exp_lift(as_cocycle(connection).to_cochain(), tol)
    cech_side = complex(moduli_coordinates(lift, tol)[0])
    presentation = pi1_presentation(surface.nerve())
    rep = monodromy(as_cocycle(connection), presentation, tol)
    betti_side = complex(evaluate_word(rep, homology_words(presentation)[0])[0, 0])

    sides = {"fuchsian": fuchsian_side, "lattice": lattice_side, "cech": cech_side, "betti": betti_side}
    discrepancy = max(_gap(v, closed_form) for v in sides.values())
    logger.info("punctured disk a = %s: discrepancy %.3e", a, discrepancy)
    return EquivalenceReport(
        route="fuchsian→lattice→cech→betti",
        fingerprint=fingerprint({"a": scalar_to_json(a), "surface": surface.to_json()}),
        invariants_before=[scalar_to_json(closed_form)],
        invariants_after=[scalar_to_json(v) for v in sides.values()],
        max_discrepancy=discrepancy,
        passed=discrepancy < INTEGRATED_TOL,
        details={
            "closedForm": scalar_to_json(closed_form),
            **{k: scalar_to_json(v) for k, v in sides.items()},
            "additivePeriod": scalar_to_json(-a),
        },
    )
