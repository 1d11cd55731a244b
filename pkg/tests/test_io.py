import numpy as np
import pytest

import snspdkit as sk
from snspdkit.errors import ConfigError
from snspdkit.io_utils import OutputDir, export_grid, header_line, write_csv, write_matrix


def test_output_dir_rejects_escapes(tmp_path):
    out = OutputDir(tmp_path / "runs")
    with pytest.raises(ConfigError, match="escapes"):
        out.path("../evil.csv")
    p = out.path("sub/dir/file.csv")
    assert p.parent.is_dir()


def test_csv_header_and_rows(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [(1.5, "x"), (2.25, "y")], "deadbeef")
    lines = path.read_text().splitlines()
    assert lines[0] == header_line("deadbeef")
    assert lines[1] == "a,b"
    assert lines[2] == "1.5,x"


def test_complex_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    mat = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
    path = tmp_path / "m.txt"
    write_matrix(path, mat, "d")
    back = np.loadtxt(path, skiprows=1, dtype=complex,
                      converters=lambda s: complex(s))
    assert np.allclose(back, mat, rtol=1e-8)


def test_export_grid_sidecar(tmp_path):
    mats = sk.default_materials()
    stack = sk.LayerStack((
        sk.Layer("GaAs", substrate=True),
        sk.Layer("AlGaAs", 1.5e-6),
        sk.Layer("GaAs", 300e-9),
    ))
    cs = sk.CrossSection(stack, sk.RidgeSpec(1.85e-6, 250e-9), None,
                         6e-6, 3.6e-6, 1300e-9, mats)
    grid = sk.rasterize(cs, sk.ResolutionPolicy(base_m=50e-9, far_m=125e-9))
    out = OutputDir(tmp_path)
    names = export_grid(grid, out, "g", "cafe")
    assert set(names) == {"g_eps.txt", "g_coords.json"}
    import json

    sidecar = json.loads((tmp_path / "g_coords.json").read_text())
    assert sidecar["_header"]["config_digest"] == "cafe"
    assert len(sidecar["x_edges_m"]) == grid.eps.shape[0] + 1
