import csv
import filecmp
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from scherk.cli import EXIT_EQUALITY, EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, main
from scherk.polygon import ScherkPolygon
from scherk.solver import read_solution

DATA = Path(__file__).parent / "data"


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


@pytest.fixture(scope="module")
def flux_dirs(tmp_path_factory):
    """The default flux run, twice, in separate directories."""
    dirs = [tmp_path_factory.mktemp(f"flux{i}") for i in range(2)]
    for d in dirs:
        assert main(["flux", "--polygon", "square", "--out", str(d), "--seed", "5"]) == EXIT_OK
    return dirs


# ---------------------------------------------------------------------------
# check


def test_check_square(capsys, tmp_path):
    code, out = _run(capsys, "check", "--polygon", "square", "--out", str(tmp_path))
    assert code == EXIT_OK
    data = json.loads(out.out)
    assert data["report"]["status"] == "admissible"
    assert json.loads((tmp_path / "check.json").read_text()) == data


def test_check_unbalanced(capsys, tmp_path, unbalanced):
    path = tmp_path / "g.json"
    unbalanced.dump(path)
    code, out = _run(capsys, "check", "--polygon", str(path))
    assert code == EXIT_VIOLATION
    assert json.loads(out.out)["report"]["balanced"] is False


def test_check_equality_lists_the_four_polygons(capsys):
    code, out = _run(capsys, "check", "--polygon", str(DATA / "extended_pair.json"))
    assert code == EXIT_EQUALITY
    rep = json.loads(out.out)["report"]
    got = sorted((tuple(v["indices"]), v["side"]) for v in rep["violations"])
    assert got == [((0, 1, 2, 3), "A"), ((0, 1, 2, 3, 6, 7), "A"),
                   ((0, 3, 4, 5, 6, 7), "B"), ((3, 4, 5, 6), "B")]


@pytest.mark.parametrize("text", ["{", '{"vertices_rad": [0, 1, 2, 3], "first_edge": "A"}'])
def test_check_bad_input(capsys, tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code, out = _run(capsys, "check", "--polygon", str(path))
    assert code == EXIT_ERROR
    assert out.err.strip()


def test_missing_file_and_bad_flags(capsys, tmp_path):
    assert _run(capsys, "check", "--polygon", str(tmp_path / "nope.json"))[0] == EXIT_ERROR
    assert _run(capsys, "check", "--polygon", "regular:3")[0] == EXIT_ERROR
    assert _run(capsys, "check", "--polygon", "regular:x")[0] == EXIT_ERROR
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--polygon", "square", "--n-list", "4,2"])
    assert exc.value.code != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "scherk", "check", "--polygon", "square"],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_OK
    assert json.loads(res.stdout)["report"]["status"] == "admissible"


# ---------------------------------------------------------------------------
# artifact commands


def test_solve_writes_solutions(capsys, tmp_path):
    code, _ = _run(capsys, "solve", "--polygon", "square", "--n-list", "2,4", "--mesh-h", "0.4",
                   "--out", str(tmp_path))
    assert code == EXIT_OK
    names = sorted(p.name for p in tmp_path.iterdir())
    for expected in ("solve.json", "u_n2.bin", "u_n4.bin", "levels_n2.svg", "divergence.svg"):
        assert expected in names
    meta, u = read_solution(tmp_path / "u_n4.bin")
    assert (tmp_path / meta["mesh_file"]).exists()
    assert meta["config"]["n_list"] == [2.0, 4.0]
    summary = json.loads((tmp_path / "solve.json").read_text())
    assert all(s["converged"] for s in summary["solutions"])


def test_solve_refuses_inadmissible(capsys, tmp_path, unbalanced):
    path = tmp_path / "g.json"
    unbalanced.dump(path)
    argv = ["solve", "--polygon", str(path), "--n-list", "2", "--mesh-h", "0.5",
            "--out", str(tmp_path / "o")]
    assert _run(capsys, *argv)[0] == EXIT_VIOLATION
    assert _run(capsys, *argv, "--allow-inadmissible")[0] == EXIT_OK


def test_flux_csv_last_ratio(flux_dirs):
    text = (flux_dirs[0] / "flux.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    assert [float(r["n"]) for r in rows] == [2, 4, 8, 16]
    ratio = float(rows[-1]["ratio"])
    assert 0.98 <= abs(ratio) <= 1.0
    cycles = json.loads((flux_dirs[0] / "cycles.json").read_text())
    assert cycles["max_ratio"] <= 1e-6


def test_outputs_are_byte_identical(flux_dirs):
    a, b = flux_dirs
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_exhaust_trace(capsys, tmp_path):
    code, _ = _run(capsys, "exhaust", "--polygon", "square", "--steps", "3", "--tau0", "1e-3",
                   "--out", str(tmp_path))
    assert code == EXIT_OK
    trace = json.loads((tmp_path / "trace.json").read_text())
    d = trace["distances"]
    assert len(d) == 4 and all(b > a for a, b in zip(d, d[1:]))
    assert trace["config"]["steps"] == 3
    assert (tmp_path / "exhaust.svg").read_text().startswith("<svg")


def test_extend_output_is_a_polygon(capsys, tmp_path):
    assert _run(capsys, "extend", "--polygon", "square", "--out", str(tmp_path))[0] == EXIT_OK
    data = json.loads((tmp_path / "extended.json").read_text())
    assert ScherkPolygon.from_spec(data["polygon"]).n == 12
    assert data["step"]["admissibility"]["status"] == "admissible"


def test_modulus_outputs(capsys, tmp_path):
    argv = ["modulus", "--polygon", "square", "--n-list", "4", "--mesh-h", "0.4"]
    assert _run(capsys, *argv, "--out", str(tmp_path / "a"))[0] == EXIT_OK
    assert _run(capsys, *argv, "--out", str(tmp_path / "b"))[0] == EXIT_OK
    rings = json.loads((tmp_path / "a" / "rings.json").read_text())
    assert len(rings["moduli"]) == 4 and "ln(R/r)" in rings["convention"]
    for name in ("rings.json", "rings.svg", "curvature.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_every_artifact_embeds_the_config(capsys, tmp_path, flux_dirs):
    _run(capsys, "solve", "--polygon", "square", "--n-list", "2", "--mesh-h", "0.5",
         "--out", str(tmp_path / "s"))
    _run(capsys, "exhaust", "--polygon", "square", "--steps", "1", "--out", str(tmp_path / "e"))
    files = [p for d in (tmp_path / "s", tmp_path / "e", flux_dirs[0]) for p in d.iterdir()]
    assert files
    for p in files:
        assert b'"polygon_source"' in p.read_bytes(), p.name
