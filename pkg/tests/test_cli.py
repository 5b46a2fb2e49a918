import csv
import io
import itertools
import json

import pytest

import main
from tests.conftest import DATA

NERVE = str(DATA / "complexes" / "torus7_nerve.json")
SURFACE = str(DATA / "complexes" / "torus7_surface.json")
COCYCLE = str(DATA / "cocycles" / "torus_rank1.json")


def run(capsys, *argv):
    code = main.main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


def test_zero_system_monodromy(capsys):
    code, report, _ = run(capsys, "fuchsian", "monodromy", str(DATA / "systems" / "zero.json"))
    assert code == 0
    assert report["command"] == "fuchsian" and report["tol"] == 1e-9
    assert report["checks"] == {"productIsIdentity": True, "eigenvalues": True, "liouville": True}
    c0 = report["result"]["monodromy"]["C0"]
    assert abs(complex(c0[0][0]["re"], c0[0][0]["im"]) - 1) < 1e-12


def test_rational_residues_are_accepted(capsys):
    code, report, _ = run(capsys, "fuchsian", "monodromy", str(DATA / "systems" / "rank1_third_fifth.json"),
                          "--tol", "1e-10")
    assert code == 0
    exponent = report["result"]["localExponents"]["0"][0]
    assert abs(exponent["re"] + 1 / 3) < 1e-12


def test_torus_cohomology(capsys):
    code, report, _ = run(capsys, "cech", "cohomology", NERVE)
    assert code == 0
    assert [g["freeRank"] for g in report["result"]["groups"]] == [1, 2, 1]
    assert report["result"]["eulerCharacteristic"] == 0
    assert report["tol"] is None
    assert set(report["fingerprints"]) == {"nerve"}


def test_single_degree_with_integer_coefficients(capsys):
    code, report, _ = run(capsys, "cech", "cohomology", str(DATA / "complexes" / "rp2_nerve.json"),
                          "--degree", "2", "--coefficients", "Z")
    assert code == 0
    (group,) = report["result"]["groups"]
    assert group["freeRank"] == 0 and group["torsion"] == [2]


def test_output_is_deterministic(capsys, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for target in (first, second):
        assert main.main(["cech", "cohomology", NERVE, "--output", str(target)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert capsys.readouterr().out == ""


def test_malformed_json_exits_with_two(capsys, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{\"n\": 3, ")
    code, report, err = run(capsys, "cech", "cohomology", str(broken))
    assert code == 2 and report is None
    assert "invalid input" in err


def test_unknown_fields_are_rejected(capsys, tmp_path):
    extra = tmp_path / "extra.json"
    extra.write_text(json.dumps({"rank": 1, "A0": [[0]], "A1": [[0]], "A2": [[0]]}))
    code, _, _ = run(capsys, "fuchsian", "monodromy", str(extra))
    assert code == 2


def test_missing_inputs_exit_with_two(capsys, tmp_path):
    assert run(capsys, "cech", "cohomology")[0] == 2
    assert run(capsys, "cech", "cohomology", str(tmp_path / "absent.json"))[0] == 2


def test_failed_check_exits_with_one(capsys, tmp_path):
    raw = json.loads(open(COCYCLE).read())
    raw["transitions"]["0,1"] = [[3]]
    broken = tmp_path / "cocycle.json"
    broken.write_text(json.dumps(raw))
    code, report, err = run(capsys, "localsys", "validate", NERVE, str(broken))
    assert code == 1
    assert report["checks"] == {"cocycle": False}
    assert "cocycle" in err


def test_cocycle_monodromy(capsys):
    code, report, _ = run(capsys, "localsys", "monodromy", NERVE, COCYCLE, "--base", "2")
    assert code == 0
    assert report["result"]["abelianization"] == {"freeRank": 2, "torsion": []}


def test_betti_reductivity_of_unipotent(capsys):
    code, report, _ = run(capsys, "betti", "reductivity", str(DATA / "representations" / "torus_unipotent.json"))
    assert code == 0
    assert report["result"]["status"] == "nonReductive"


@pytest.mark.parametrize("name", ["torus_unipotent.json", "torus_diagonal.json"])
def test_equiv_betti_cech(capsys, name):
    code, report, _ = run(capsys, "equiv", "betti-cech", str(DATA / "representations" / name), NERVE)
    assert code == 0
    assert report["result"]["exactEqual"] is True


def test_equiv_cech_lattice(capsys):
    code, report, _ = run(capsys, "equiv", "cech-lattice", NERVE, COCYCLE, SURFACE)
    assert code == 0
    assert report["result"]["passed"]
    assert set(report["fingerprints"]) == {"nerve", "cocycle", "surface"}


def test_equiv_lambda(capsys):
    code, report, _ = run(capsys, "equiv", "lambda", str(DATA / "systems" / "rank1_third_fifth.json"),
                          "--lambda", "2", "--lambda", "1j", "--tol", "1e-10")
    assert code == 0
    assert len(report["result"]["details"]["runs"]) == 2


def test_equiv_punctured_disk(capsys):
    code, report, _ = run(capsys, "equiv", "punctured-disk", "--params", str(DATA / "systems" / "punctured_disk.json"))
    assert code == 0
    assert report["result"]["maxDiscrepancy"] < 1e-6


def test_zero_lambda_exits_with_two(capsys):
    code, _, err = run(capsys, "equiv", "lambda", str(DATA / "systems" / "zero.json"), "--lambda", "0")
    assert code == 2
    assert "ZeroLambda" in err


# ============================================================
# SHAPES, CSV AND SURFACE MONODROMY
# ============================================================
def trivial_connection(rank: int = 1) -> dict:
    identity = [[int(i == j) for j in range(rank)] for i in range(rank)]
    return {"rank": rank, "transport": {f"{u},{v}": identity for u, v in itertools.combinations(range(7), 2)}}


def test_non_square_cocycle_exits_with_two(capsys, tmp_path):
    raw = json.loads(open(COCYCLE).read())
    del raw["transitions"]["0,2"]
    raw["transitions"]["2,0"] = [[1, 0, 0], [0, 1, 0]]
    broken = tmp_path / "cocycle.json"
    broken.write_text(json.dumps(raw))
    code, report, err = run(capsys, "localsys", "validate", NERVE, str(broken))
    assert code == 2 and report is None
    assert "DimensionMismatch" in err


def test_non_square_connection_exits_with_two(capsys, tmp_path):
    raw = trivial_connection()
    del raw["transport"]["0,2"]
    raw["transport"]["2,0"] = [[1, 0, 0], [0, 1, 0]]
    broken = tmp_path / "connection.json"
    broken.write_text(json.dumps(raw))
    code, report, err = run(capsys, "lattice", "curvature", SURFACE, str(broken))
    assert code == 2 and report is None
    assert "DimensionMismatch" in err


def test_csv_report(capsys):
    assert main.main(["cech", "cohomology", NERVE, "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["section", "key", "value"]
    assert ["run", "command", "cech"] in rows
    assert ["result", "eulerCharacteristic", "0"] in rows
    assert ["result", "groups[0].freeRank", "1"] in rows
    assert sum(1 for row in rows if row[0] == "fingerprint") == 1


def test_csv_and_json_reports_carry_the_same_checks(capsys, tmp_path):
    json_path, csv_path = tmp_path / "r.json", tmp_path / "r.csv"
    assert main.main(["localsys", "monodromy", NERVE, COCYCLE, "--output", str(json_path)]) == 0
    assert main.main(["localsys", "monodromy", NERVE, COCYCLE, "--output", str(csv_path), "--format", "csv"]) == 0
    checks = json.loads(json_path.read_text())["checks"]
    rows = [row for row in csv.reader(io.StringIO(csv_path.read_text())) if row[0] == "check"]
    assert {key: json.loads(value) for _, key, value in rows} == checks


def test_lattice_surface_monodromy(capsys, tmp_path):
    connection = tmp_path / "connection.json"
    connection.write_text(json.dumps(trivial_connection(2)))
    code, report, _ = run(capsys, "lattice", "monodromy", SURFACE, str(connection))
    assert code == 0
    assert report["checks"] == {"relations": True, "surfaceRelator": True}
    assert report["result"]["genus"] == 1
    assert report["result"]["canonicalLoops"]["order"] == ["A1", "B1"]
