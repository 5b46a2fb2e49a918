import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

load_dotenv()

from src import betti, cech, equivalences, fuchsian, lattice, localsys
from src.errors import InputError, NonabcohError, NotCocycle, SchemaError
from src.numkit import Mode, float_scalar, scalar_to_json
from src.schemas import (
    CochainInput,
    CocycleInput,
    ConnectionInput,
    GaugeInput,
    HypergeometricInput,
    NerveInput,
    OutputFormat,
    PathInput,
    PuncturedDiskInput,
    RepresentationInput,
    RunConfig,
    RunReport,
    SurfaceInput,
    SystemInput,
    WordsInput,
)
from src.utils import DEFAULT_BASE, LOG_LEVEL, fingerprint_bytes

logger = logging.getLogger("nonabcoh")

Outcome = tuple[dict, dict]


# ============================================================
# 1. INPUT LOADING
# ============================================================
class Inputs:
    """Reads input files once, parses them with their schema and remembers their fingerprints."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.fingerprints: dict[str, str] = {}

    def load(self, path: Optional[str], model: type[BaseModel], role: str):
        if path is None:
            raise SchemaError(f"missing {role} input")
        raw = Path(path).read_bytes()
        self.fingerprints[role] = fingerprint_bytes(raw)
        return model.model_validate_json(raw)

    def positional(self, index: int, model: type[BaseModel], role: str):
        inputs = self.config.inputs
        return self.load(inputs[index] if index < len(inputs) else None, model, role)

    @property
    def mode(self) -> Mode:
        return self.config.mode

    @property
    def tol(self) -> float:
        return self.config.tol

    def vertex(self) -> int:
        base = self.config.base
        try:
            return 0 if base is None else int(base)
        except ValueError as exc:
            raise SchemaError(f"--base must be a vertex index here, got {base!r}") from exc

    def point(self) -> complex:
        base = self.config.base
        try:
            return DEFAULT_BASE if base is None else complex(base.replace(" ", ""))
        except ValueError as exc:
            raise SchemaError(f"--base must be a complex number here, got {base!r}") from exc

    def nerve(self, index: int = 0):
        return self.positional(index, NerveInput, "nerve").to_domain()

    def surface(self, index: int = 0):
        return self.positional(index, SurfaceInput, "surface").to_domain()

    def gauge(self, nerve):
        return self.load(self.config.gauge, GaugeInput, "gauge").to_domain(nerve, self.mode)


def _matrix_map(table: dict) -> dict:
    return {",".join(str(i) for i in key): m.to_json() for key, m in table.items()}


# ============================================================
# 2. BETTI
# ============================================================
def betti_check(inputs: Inputs) -> Outcome:
    rep = inputs.positional(0, RepresentationInput, "representation").to_domain(inputs.mode)
    betti.validate(rep, inputs.tol)
    return {"representation": rep.to_json(), "group": rep.group.to_json()}, {"relations": True}


def betti_traces(inputs: Inputs) -> Outcome:
    rep = inputs.positional(0, RepresentationInput, "representation").to_domain(inputs.mode)
    if inputs.config.words:
        words = inputs.load(inputs.config.words, WordsInput, "words").to_domain()
    else:
        words = equivalences.standard_words(rep.group)
    traces = betti.trace_invariants(rep, words)
    return {
        "words": [w.to_json() for w in words],
        "traces": [scalar_to_json(t) for t in traces],
    }, {"relations": betti.check_relations(rep, inputs.tol)}


def betti_reductivity(inputs: Inputs) -> Outcome:
    rep = inputs.positional(0, RepresentationInput, "representation").to_domain(inputs.mode)
    verdict = betti.reductivity(rep, inputs.tol)
    return verdict.to_json(), {"relations": betti.check_relations(rep, inputs.tol), "witness": verdict.check(rep, inputs.tol)}


# ============================================================
# 3. CECH
# ============================================================
def cech_cohomology(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    degrees = [inputs.config.degree] if inputs.config.degree is not None else range(nerve.dimension + 1)
    reports = [cech.cohomology(nerve, p, inputs.config.coefficients) for p in degrees]
    return {
        "nerve": nerve.to_json(),
        "eulerCharacteristic": nerve.euler_characteristic(),
        "groups": [r.to_json() for r in reports],
    }, {}


def cech_chern(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    u = inputs.positional(1, CochainInput, "cochain").to_domain(nerve, inputs.mode)
    chern = cech.chern_class(u, inputs.tol)
    lift = cech.exp_lift(u, inputs.tol) if chern.is_zero else None
    result = {"chernClass": chern.to_json(), "expLift": lift.to_json() if lift is not None else None}
    return result, {"liftExistsIffZero": (lift is not None) == chern.is_zero}


def cech_moduli(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    cochain = inputs.positional(1, CochainInput, "cochain").to_domain(nerve, inputs.mode)
    if cochain.coefficients is cech.Coefficients.CX:
        lift = cech.exp_lift(cochain, inputs.tol)
        if lift is None:
            raise NotCocycle("multiplicative cocycle has nonzero Chern class; it is not in the flat moduli")
        cochain = lift
    coordinates = cech.moduli_coordinates(cochain, inputs.tol)
    return {
        "cycles": cech.h1_cycles(nerve),
        "coordinates": [scalar_to_json(c) for c in coordinates],
    }, {}


# ============================================================
# 4. LOCAL SYSTEMS
# ============================================================
def localsys_validate(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    cocycle = inputs.positional(1, CocycleInput, "cocycle").to_domain(nerve, inputs.mode)
    return {"rank": cocycle.rank}, {"cocycle": localsys.validate_cocycle(cocycle, inputs.tol)}


def localsys_gauge(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    cocycle = inputs.positional(1, CocycleInput, "cocycle").to_domain(nerve, inputs.mode)
    gauge = inputs.gauge(nerve)
    gauged = localsys.gauge_act(gauge, cocycle)
    basepoint = inputs.vertex()
    presentation = localsys.pi1_presentation(nerve, basepoint)
    before = localsys.monodromy(cocycle, presentation, inputs.tol)
    after = localsys.monodromy(gauged, presentation, inputs.tol)
    expected = betti.conjugate(before, gauge.values[basepoint])
    covariant = all(a.equals(b, inputs.tol) for a, b in zip(after.images, expected.images))
    return {"cocycle": gauged.to_json()}, {
        "cocycle": localsys.validate_cocycle(gauged, inputs.tol),
        "monodromyConjugated": covariant,
    }


def localsys_monodromy(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    cocycle = inputs.positional(1, CocycleInput, "cocycle").to_domain(nerve, inputs.mode)
    presentation = localsys.pi1_presentation(nerve, inputs.vertex())
    rep = localsys.monodromy(cocycle, presentation, inputs.tol)
    free_rank, torsion = localsys.abelianization(presentation)
    return {
        "presentation": presentation.to_json(),
        "representation": rep.to_json(),
        "abelianization": {"freeRank": free_rank, "torsion": torsion},
    }, {"relations": betti.check_relations(rep, inputs.tol)}


# ============================================================
# 5. LATTICE
# ============================================================
def _connection(inputs: Inputs):
    surface = inputs.surface()
    return inputs.positional(1, ConnectionInput, "connection").to_domain(surface, inputs.mode)


def lattice_curvature(inputs: Inputs) -> Outcome:
    conn = _connection(inputs)
    faces = lattice.curvature(conn)
    result = {"curvature": _matrix_map(faces), "flat": lattice.is_flat(conn, inputs.tol)}
    checks = {}
    if inputs.config.gauge:
        gauge = inputs.gauge(conn.surface.nerve()).values
        gauged = lattice.curvature(lattice.gauge_act(gauge, conn))
        inverses = {v: g.inverse() for v, g in gauge.items()}
        checks["gaugeCovariant"] = all(
            gauged[t].equals(inverses[min(t)] @ faces[t] @ gauge[min(t)], inputs.tol) for t in faces
        )
    return result, checks


def lattice_holonomy(inputs: Inputs) -> Outcome:
    conn = _connection(inputs)
    path = inputs.load(inputs.config.path, PathInput, "path").to_domain()
    value = lattice.holonomy(conn, path)
    closed = bool(path) and path[0][0] == path[-1][1]
    return {"holonomy": value.to_json(), "closed": closed, "flat": lattice.is_flat(conn, inputs.tol)}, {}


def lattice_monodromy(inputs: Inputs) -> Outcome:
    conn = _connection(inputs)
    base = inputs.vertex()
    edge_path = lattice.monodromy_rep(conn, base, inputs.tol)
    canonical = lattice.canonical_loops(conn.surface, base)
    # raises RelationViolation (exit 1) if Π[A_i, B_i] is not the identity
    surface_rep = lattice.surface_monodromy(conn, base, inputs.tol)
    return {
        "genus": canonical.genus,
        "edgePath": edge_path.to_json(),
        "canonicalLoops": canonical.to_json(),
        "surfaceGroup": surface_rep.to_json(),
    }, {"relations": betti.check_relations(edge_path, inputs.tol), "surfaceRelator": True}


def lattice_moduli(inputs: Inputs) -> Outcome:
    conn = _connection(inputs)
    values = lattice.abelian_moduli(conn, inputs.tol)
    return {
        "genus": conn.surface.genus,
        "cycles": cech.h1_cycles(conn.surface.nerve()),
        "holonomies": [scalar_to_json(v) for v in values],
    }, {"flat": True}


# ============================================================
# 6. FUCHSIAN
# ============================================================
def _fuchsian_monodromy(inputs: Inputs, system) -> fuchsian.MonodromyResult:
    return fuchsian.monodromy(
        system, inputs.point(), inputs.tol, inputs.config.radius, workers=inputs.config.threads,
    )


def fuchsian_monodromy(inputs: Inputs) -> Outcome:
    system = inputs.positional(0, SystemInput, "system").to_domain()
    result = _fuchsian_monodromy(inputs, system)
    check = fuchsian.eigenvalue_check(system, result)
    exponents = {p: [scalar_to_json(mu) for mu in fuchsian.local_exponents(system, p)] for p in ("0", "1", "inf")}
    return {
        "monodromy": result.to_json(),
        "eigenvalueCheck": check.to_json(),
        "localExponents": exponents,
    }, {
        "productIsIdentity": result.residual_identity_error < 1e-6,
        "liouville": result.liouville_passed,
        "eigenvalues": check.passed,
    }


def fuchsian_hypergeometric(inputs: Inputs) -> Outcome:
    source = inputs.config.params or (inputs.config.inputs[0] if inputs.config.inputs else None)
    params = inputs.load(source, HypergeometricInput, "params").to_domain()
    system = fuchsian.hypergeometric_to_system(params)
    residual = fuchsian.hypergeometric_residual(params)
    result = _fuchsian_monodromy(inputs, system)
    check = fuchsian.eigenvalue_check(system, result)
    return {
        "system": system.to_json(),
        "resonance": params.flags(),
        "residual": residual,
        "monodromy": result.to_json(),
        "eigenvalueCheck": check.to_json(),
    }, {"residual": residual < 1e-6, "eigenvalues": check.passed, "liouville": result.liouville_passed}


def _lambdas(inputs: Inputs) -> list[complex]:
    try:
        return [complex(value.replace(" ", "")) for value in inputs.config.lambdas]
    except ValueError as exc:
        raise SchemaError(f"--lambda values must be complex numbers: {exc}") from exc


def fuchsian_lambda(inputs: Inputs) -> Outcome:
    system = inputs.positional(0, SystemInput, "system").to_domain()
    lams = _lambdas(inputs) or [1.0]
    runs, liouville = [], []
    for lam in lams:
        rescaled = fuchsian.lambda_rescale(system, lam)
        result = _fuchsian_monodromy(inputs, system.with_lambda(lam))
        liouville.append(result.liouville_passed)
        runs.append({
            "lambda": scalar_to_json(lam),
            "rescaled": rescaled.to_json(),
            "monodromy": result.to_json(),
        })
    return {"runs": runs}, {"liouville": all(liouville)}


# ============================================================
# 7. EQUIVALENCES
# ============================================================
def equiv_betti_cech(inputs: Inputs) -> Outcome:
    rep = inputs.positional(0, RepresentationInput, "representation").to_domain(inputs.mode)
    nerve = inputs.nerve(1)
    report = equivalences.roundtrip_betti_cech(rep, nerve, inputs.vertex(), inputs.tol)
    return report.model_dump(by_alias=True, mode="json"), {"equivalence": report.passed}


def equiv_cech_lattice(inputs: Inputs) -> Outcome:
    nerve = inputs.nerve()
    cocycle = inputs.positional(1, CocycleInput, "cocycle").to_domain(nerve, inputs.mode)
    surface = inputs.surface(2)
    report = equivalences.roundtrip_cech_lattice(cocycle, nerve, surface, inputs.tol)
    return report.model_dump(by_alias=True, mode="json"), {"equivalence": report.passed}


def equiv_lambda(inputs: Inputs) -> Outcome:
    system = inputs.positional(0, SystemInput, "system").to_domain()
    report = equivalences.lambda_equivalence(
        system, _lambdas(inputs) or [1.0], inputs.tol, inputs.point(), inputs.config.radius,
    )
    return report.model_dump(by_alias=True, mode="json"), {"equivalence": report.passed}


def equiv_punctured_disk(inputs: Inputs) -> Outcome:
    source = inputs.config.params or (inputs.config.inputs[0] if inputs.config.inputs else None)
    a = inputs.load(source, PuncturedDiskInput, "params").a
    report = equivalences.punctured_disk_equivalence(float_scalar(a), inputs.tol)
    return report.model_dump(by_alias=True, mode="json"), {"equivalence": report.passed}


HANDLERS: dict[str, dict[str, Callable[[Inputs], Outcome]]] = {
    "betti": {"check": betti_check, "traces": betti_traces, "reductivity": betti_reductivity},
    "cech": {"cohomology": cech_cohomology, "chern": cech_chern, "moduli": cech_moduli},
    "localsys": {"validate": localsys_validate, "gauge": localsys_gauge, "monodromy": localsys_monodromy},
    "lattice": {
        "curvature": lattice_curvature,
        "holonomy": lattice_holonomy,
        "monodromy": lattice_monodromy,
        "moduli": lattice_moduli,
    },
    "fuchsian": {"monodromy": fuchsian_monodromy, "hypergeometric": fuchsian_hypergeometric, "lambda": fuchsian_lambda},
    "equiv": {
        "betti-cech": equiv_betti_cech,
        "cech-lattice": equiv_cech_lattice,
        "lambda": equiv_lambda,
        "punctured-disk": equiv_punctured_disk,
    },
}


# ============================================================
# 8. ENTRY POINT
# ============================================================
def dispatch(config: RunConfig) -> tuple[int, RunReport]:
    inputs = Inputs(config)
    result, checks = HANDLERS[config.command][config.action](inputs)
    report = RunReport(
        command=config.command,
        action=config.action,
        mode=config.mode.value,
        tol=config.effective_tol,
        fingerprints=inputs.fingerprints,
        result=result,
        checks=checks,
    )
    return (0 if all(checks.values()) else 1), report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonabcoh",
        description="Moduli of flat bundles: representations, Čech cocycles, lattice connections, Fuchsian monodromy.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for command, actions in HANDLERS.items():
        sub = commands.add_parser(command)
        sub.add_argument("action", choices=sorted(actions))
        sub.add_argument("inputs", nargs="*", help="JSON input files in the order the action expects")
        sub.add_argument("--tol", type=float, default=1e-9)
        sub.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.EXACT.value)
        sub.add_argument("--output", help="Write the report here instead of stdout")
        sub.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.JSON.value)
        sub.add_argument("--base", help="Base vertex, or base point in ℂ for Fuchsian loops")
        sub.add_argument("--radius", type=float, default=0.25)
        sub.add_argument("--coefficients", choices=[c.value for c in cech.Coefficients], default="C")
        sub.add_argument("--degree", type=int)
        sub.add_argument("--words", help="JSON word list for trace invariants")
        sub.add_argument("--lambda", dest="lambdas", action="append", default=[], help="Repeatable λ value")
        sub.add_argument("--params", help="JSON parameter file")
        sub.add_argument("--gauge", help="JSON gauge file")
        sub.add_argument("--path", help="JSON edge path file")
        sub.add_argument("--threads", type=int)
    return parser


def _flatten(prefix: str, value, rows: list):
    if isinstance(value, dict):
        for key in sorted(value):
            _flatten(f"{prefix}.{key}" if prefix else str(key), value[key], rows)
    elif isinstance(value, list):
        for index, item in enumerate(value):
            _flatten(f"{prefix}[{index}]", item, rows)
    else:
        rows.append((prefix, value if isinstance(value, str) else json.dumps(value)))


def report_rows(report: RunReport) -> list[tuple[str, str, str]]:
    """The report as (section, key, value) rows: run metadata, fingerprints, checks, then result leaves."""
    dumped = report.model_dump(by_alias=True, mode="json")
    rows = [("run", name, dumped[name] if isinstance(dumped[name], str) else json.dumps(dumped[name]))
            for name in ("command", "action", "mode", "tol")]
    rows += [("fingerprint", role, digest) for role, digest in sorted(dumped["fingerprints"].items())]
    rows += [("check", name, json.dumps(ok)) for name, ok in sorted(dumped["checks"].items())]
    leaves = []
    _flatten("", dumped["result"], leaves)
    rows += [("result", key, value) for key, value in leaves]
    return rows


def _render(report: RunReport, fmt: OutputFormat) -> str:
    if fmt is OutputFormat.CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("section", "key", "value"))
        writer.writerows(report_rows(report))
        return buffer.getvalue()
    return json.dumps(report.model_dump(by_alias=True, mode="json"), sort_keys=True, indent=2) + "\n"


def _emit(report: RunReport, output: Optional[str], fmt: OutputFormat = OutputFormat.JSON):
    text = _render(report, fmt)
    if output:
        Path(output).write_text(text)
        logger.info("✅ report written to %s", output)
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(**vars(args))
        code, report = dispatch(config)
    except ValidationError as exc:
        print(f"❌ invalid input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"❌ cannot read input: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NonabcohError as exc:
        print(f"⚠️ {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    _emit(report, config.output, config.format)
    if code:
        failed = sorted(name for name, ok in report.checks.items() if not ok)
        print(f"⚠️ checks failed: {', '.join(failed)}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
