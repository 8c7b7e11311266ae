import math
from pathlib import Path

import numpy as np
import pytest

from reynolds_osgs.cli import PRESETS, main
from reynolds_osgs.io import (
    ConfigError,
    extract_line,
    parse_config,
    parse_number,
    read_field_csv,
    write_field_csv,
)
from reynolds_osgs.mesh import build_mesh

SMOOTH_NO_STAB = """\
[case]
name = smooth

[model]
stabilization_mode = none

[mesh]
nx = 96
ny = 32
"""


def _write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _data_rows(path):
    return [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]


def test_parse_number_accepts_pi_expressions():
    assert parse_number("7*pi/9") == pytest.approx(7 * math.pi / 9)
    assert parse_number(" -0.5 ") == -0.5
    assert parse_number("2**3") == 8.0
    for bad in ("__import__('os')", "pi()", "1/0", "x"):
        with pytest.raises(ValueError):
            parse_number(bad)


def test_parse_config_resolves_case_defaults():
    cfg = parse_config(PRESETS["bearing"])
    assert cfg.case == "bearing"
    assert cfg.model.x_a == pytest.approx(7 * math.pi / 9)
    assert (cfg.nx, cfg.ny) == (100, 32)
    assert cfg.formats == ("csv", "vtk")


def test_config_round_trips_through_ini():
    for text in PRESETS.values():
        cfg = parse_config(text)
        again = parse_config(cfg.to_ini())
        assert again.model == cfg.model and again.solver == cfg.solver
        assert (again.nx, again.ny, again.case, again.formats) == (cfg.nx, cfg.ny, cfg.case, cfg.formats)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[mesh]\nnx = 4\nny = 2\nnz = 3\n", "nz"),
        ("[meshes]\nnx = 4\n", "meshes"),
        ("[mesh]\nnx = 4\n", "mesh.ny"),
        ("[mesh]\nnx = four\nny = 2\n", "mesh.nx"),
        ("[model]\nu_bar = 1.5\n[mesh]\nnx = 4\nny = 2\n", "u_bar"),
        ("[model]\nstabilization_mode = supg\n[mesh]\nnx = 4\nny = 2\n", "stabilization_mode"),
        ("[case]\nname = cylinder\n[mesh]\nnx = 4\nny = 2\n", "case.name"),
        ("[mesh]\nnx = 4\nny = 2\n[output]\nformats = png\n", "output.formats"),
        ("[model]\nzeta\n", "zeta"),
    ],
)
def test_parse_config_errors_name_the_key(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_field_csv_round_trip_is_bitwise(tmp_path):
    mesh = build_mesh(7, 3)
    rng = np.random.default_rng(0)
    u = rng.normal(size=mesh.n_nodes) * 10.0 ** rng.integers(-20, 20, mesh.n_nodes)
    xi = rng.normal(size=mesh.n_nodes)
    path = tmp_path / "field.csv"
    write_field_csv(path, mesh, u, xi, provenance="[case]\nname = test")
    data = read_field_csv(path)
    np.testing.assert_array_equal(data.u, u)
    np.testing.assert_array_equal(data.xi, xi)
    np.testing.assert_array_equal(np.column_stack([data.x, data.y]), mesh.nodes)
    assert "name = test" in data.header


def test_extract_line_constant_field(tmp_path):
    mesh = build_mesh(5, 4)
    path = tmp_path / "field.csv"
    write_field_csv(path, mesh, np.full(mesh.n_nodes, 2.5), np.zeros(mesh.n_nodes))
    x, u = extract_line(read_field_csv(path), 0.3)
    np.testing.assert_array_equal(x, mesh.x_stations)
    np.testing.assert_array_equal(u, 2.5)


def test_cli_solve_bearing_preset(tmp_path, capsys):
    out = tmp_path / "bearing"
    assert main(["solve", "--preset", "bearing", "-o", str(out)]) == 0
    for name in ("field.csv", "trace.csv", "summary.txt", "field.vtk"):
        text = (out / name).read_text()
        if name != "field.vtk":
            assert "u_bar = 0.97999999999999998" in text
    assert "converged = true" in (out / "summary.txt").read_text()
    assert "converged = true" in capsys.readouterr().out

    # Profile along y = 0: pressure zone, then a negative cavitation plateau.
    line = tmp_path / "line.csv"
    assert main(["extract-line", str(out / "field.csv"), "--y", "0", "-o", str(line)]) == 0
    x, u = np.loadtxt(line, delimiter=",", skiprows=1).T
    assert u.max() > 1.0 and x[np.argmax(u)] < 7 * np.pi / 9
    assert np.all(u[(x > 4.0) & (x < 6.0)] < 0)

    assert main(["extract-line", str(out / "field.csv"), "--y", "1", "-o", str(line)]) == 0
    _, u_top = np.loadtxt(line, delimiter=",", skiprows=1).T
    np.testing.assert_array_equal(u_top, 0.0)

    assert main(["extract-line", str(out / "field.csv"), "--y", "3"]) == 1
    assert "outside" in capsys.readouterr().err

    vtk = (out / "field.vtk").read_text().splitlines()
    assert vtk[0] == "# vtk DataFile Version 3.0"
    assert "DIMENSIONS 101 33 1" in vtk


def test_cli_solve_without_stabilization_reports_non_convergence(tmp_path):
    out = tmp_path / "nostab"
    code = main(["solve", _write(tmp_path, SMOOTH_NO_STAB), "-o", str(out)])
    assert code == 2
    rows = _data_rows(out / "trace.csv")
    assert rows[0] == "iteration,method,residual,update_norm"
    assert len(rows) == 51
    assert "converged = false" in (out / "summary.txt").read_text()


def test_cli_rejects_unknown_key(tmp_path, capsys):
    path = _write(tmp_path, "[mesh]\nnx = 4\nny = 2\nsmoothing = 3\n")
    assert main(["solve", path, "-o", str(tmp_path / "x")]) == 1
    assert "smoothing" in capsys.readouterr().err


def test_cli_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["solve"]) == 1
    assert main(["solve", "--preset", "nope"]) == 1
    assert main(["solve", str(tmp_path / "missing.ini")]) == 1
    assert main(["extract-line", str(tmp_path / "missing.csv")]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve", "--preset", "smooth", "-o", str(blocker / "sub")]) == 1
    assert "not writable" in capsys.readouterr().err


def test_cli_converge_single_level(tmp_path, capsys):
    text = "[case]\nname = smooth\n[mesh]\nbase_nx = 6\nbase_ny = 2\nlevels = 1\n"
    out = tmp_path / "conv"
    assert main(["converge", _write(tmp_path, text), "-o", str(out)]) == 0
    rows = _data_rows(out / "convergence.csv")
    assert rows[0].split(",")[:6] == ["level", "nx", "ny", "h", "error_l2", "order"]
    assert len(rows) == 2 and rows[1].split(",")[5] == ""
    assert "error_l2" in capsys.readouterr().out


def test_cli_converge_series(tmp_path, capsys):
    text = "[case]\nname = smooth\n[mesh]\nbase_nx = 3\nbase_ny = 1\nlevels = 4\n"
    out = tmp_path / "conv"
    assert main(["converge", _write(tmp_path, text), "-o", str(out)]) == 0
    rows = [r.split(",") for r in _data_rows(out / "convergence.csv")[1:]]
    assert [int(r[1]) for r in rows] == [3, 6, 12, 24]
    assert float(rows[-1][5]) > 1.5


def test_cli_converge_needs_series(tmp_path):
    assert main(["converge", "--preset", "smooth", "-o", str(tmp_path)]) == 1


def test_cli_presets(capsys):
    assert main(["presets"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    assert [l.split()[1] for l in lines] == ["smooth", "boundary_layer", "bearing"]
    assert main(["presets", "--show", "bearing"]) == 0
    assert "x_a = 7*pi/9" in capsys.readouterr().out


def test_inline_comments_are_ignored():
    cfg = parse_config("[case]\nname = bearing   # journal\n[mesh]\nnx = 4 ; coarse\nny = 2\n")
    assert cfg.case == "bearing" and cfg.nx == 4
