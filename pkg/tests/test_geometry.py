import numpy as np
import pytest

import snspdkit as sk
from snspdkit.errors import ConfigError
from snspdkit.geometry import MIN_CLEARANCE_M
from snspdkit.materials import NBN_INDEX_1300


@pytest.fixture()
def mats():
    return sk.default_materials()


@pytest.fixture()
def reference_cs(mats):
    stack = sk.LayerStack((
        sk.Layer("GaAs", substrate=True),
        sk.Layer("AlGaAs", 1.5e-6),
        sk.Layer("GaAs", 300e-9),
    ))
    ridge = sk.RidgeSpec(width_m=1.85e-6, etch_depth_m=250e-9)
    wires = sk.NanowireArray(count=4, width_m=100e-9, pitch_m=250e-9, thickness_m=4.3e-9,
                             material="NbN", cap_material="SiOx", cap_thickness_m=100e-9)
    return sk.CrossSection(stack, ridge, wires, 6e-6, 3.6e-6, 1300e-9, mats)


# -- alignment margin ------------------------------------------------------

def test_alignment_margin_reference_geometry():
    ridge = sk.RidgeSpec(width_m=1.85e-6, etch_depth_m=250e-9)
    wires = sk.NanowireArray(4, 100e-9, 250e-9, 4.3e-9)
    # extent = 3*250 + 100 = 850 nm -> margin (1850 - 850)/2 = 500 nm
    assert sk.alignment_margin(ridge, wires) == pytest.approx(0.5e-6, rel=1e-12)


def test_alignment_margin_zero_when_array_fills_ridge():
    ridge = sk.RidgeSpec(width_m=850e-9, etch_depth_m=100e-9)
    wires = sk.NanowireArray(4, 100e-9, 250e-9, 4.3e-9)
    assert sk.alignment_margin(ridge, wires) == pytest.approx(0.0, abs=1e-15)


def test_alignment_margin_with_offset():
    ridge = sk.RidgeSpec(width_m=1.85e-6, etch_depth_m=250e-9)
    wires = sk.NanowireArray(4, 100e-9, 250e-9, 4.3e-9, offset_m=100e-9)
    assert sk.alignment_margin(ridge, wires) == pytest.approx(0.4e-6, rel=1e-12)


def test_alignment_margin_can_go_negative():
    ridge = sk.RidgeSpec(width_m=800e-9, etch_depth_m=100e-9)
    wires = sk.NanowireArray(4, 100e-9, 250e-9, 4.3e-9)
    assert sk.alignment_margin(ridge, wires) < 0


# -- rasterization ---------------------------------------------------------

def test_rasterize_reference_geometry(reference_cs):
    grid = sk.rasterize(reference_cs)
    eps_nbn = NBN_INDEX_1300 ** 2
    nbn_mask = grid.eps == eps_nbn
    assert nbn_mask.any()
    # every interface lands on a grid line: wire edges are exact member floats
    wire_edges = set()
    for c in reference_cs.wires.wire_centers():
        wire_edges |= {c - 50e-9, c + 50e-9}
    assert wire_edges <= set(grid.x_edges_m.tolist())
    assert {0.0, reference_cs.wires.thickness_m} <= set(grid.y_edges_m.tolist())
    # cell-count invariants
    y_in_wire = (grid.y_centers_m > 0) & (grid.y_centers_m < reference_cs.wires.thickness_m)
    assert int(y_in_wire.sum()) >= 2
    for c in reference_cs.wires.wire_centers():
        cols = np.abs(grid.x_centers_m - c) < 50e-9
        assert int(cols.sum()) >= 4


def test_nbn_area_matches_geometry(reference_cs):
    grid = sk.rasterize(reference_cs)
    areas = np.diff(grid.x_edges_m)[:, None] * np.diff(grid.y_edges_m)[None, :]
    nbn_area = float(areas[grid.eps == NBN_INDEX_1300 ** 2].sum())
    w = reference_cs.wires
    expected = w.count * w.width_m * w.thickness_m
    assert nbn_area == pytest.approx(expected, rel=1e-6)


def test_rasterize_without_wires_is_lossless(reference_cs):
    from dataclasses import replace

    grid = sk.rasterize(replace(reference_cs, wires=None))
    assert float(np.max(np.abs(grid.eps.imag))) == 0.0


def test_rasterize_mirror_symmetry(reference_cs):
    grid = sk.rasterize(reference_cs)
    assert np.array_equal(grid.x_edges_m, -grid.x_edges_m[::-1])
    assert np.array_equal(grid.eps, grid.eps[::-1, :])


def test_rasterize_deterministic(reference_cs):
    g1 = sk.rasterize(reference_cs)
    g2 = sk.rasterize(reference_cs)
    assert np.array_equal(g1.x_edges_m, g2.x_edges_m)
    assert np.array_equal(g1.y_edges_m, g2.y_edges_m)
    assert np.array_equal(g1.eps, g2.eps)


def test_etched_region_gets_ambient(reference_cs):
    grid = sk.rasterize(reference_cs)
    outside = np.abs(grid.x_centers_m) > reference_cs.ridge.width_m / 2
    etched = (grid.y_centers_m > -reference_cs.ridge.etch_depth_m) & (grid.y_centers_m < 0)
    assert np.all(grid.eps[np.ix_(outside, etched)] == 1.0 + 0j)


def test_policy_too_coarse_for_wire_thickness(reference_cs):
    with pytest.raises(ConfigError, match="2 cells"):
        sk.rasterize(reference_cs, sk.ResolutionPolicy(fine_m=5e-9, base_m=25e-9))


def test_policy_too_coarse_for_wire_width(reference_cs):
    with pytest.raises(ConfigError, match="4 cells"):
        sk.rasterize(reference_cs, sk.ResolutionPolicy(x_base_m=50e-9, edge_band_m=0.0))


# -- construction validation ----------------------------------------------

def test_window_clearance_enforced(mats):
    stack = sk.LayerStack((
        sk.Layer("GaAs", substrate=True),
        sk.Layer("AlGaAs", 1.5e-6),
        sk.Layer("GaAs", 300e-9),
    ))
    ridge = sk.RidgeSpec(width_m=1.85e-6, etch_depth_m=250e-9)
    with pytest.raises(ConfigError, match="lateral clearance"):
        sk.CrossSection(stack, ridge, None, 4.0e-6, 3.6e-6, 1300e-9, mats)
    with pytest.raises(ConfigError, match="vertical clearance"):
        sk.CrossSection(stack, ridge, None, 6.0e-6, 2.0e-6, 1300e-9, mats)


def test_window_never_reaches_substrate(reference_cs):
    from dataclasses import replace

    assert reference_cs.window_bottom_m >= reference_cs.stack.stack_bottom_m
    tall = replace(reference_cs, window_height_m=6.0e-6)
    assert tall.window_bottom_m == pytest.approx(tall.stack.stack_bottom_m)
    assert tall.window_top_m - tall.window_bottom_m == pytest.approx(6.0e-6)


def test_etch_depth_budget(mats):
    stack = sk.LayerStack((
        sk.Layer("GaAs", substrate=True),
        sk.Layer("AlGaAs", 1.5e-6),
        sk.Layer("GaAs", 300e-9),
    ))
    with pytest.raises(ConfigError, match="etch depth"):
        sk.CrossSection(stack, sk.RidgeSpec(1.85e-6, 400e-9), None, 6e-6, 3.6e-6, 1300e-9, mats)


def test_overhanging_array_rejected(mats):
    stack = sk.LayerStack((
        sk.Layer("GaAs", substrate=True),
        sk.Layer("AlGaAs", 1.5e-6),
        sk.Layer("GaAs", 300e-9),
    ))
    wires = sk.NanowireArray(4, 100e-9, 250e-9, 4.3e-9, offset_m=600e-9)
    with pytest.raises(ConfigError, match="alignment margin"):
        sk.CrossSection(stack, sk.RidgeSpec(1.85e-6, 250e-9), wires, 6e-6, 3.6e-6, 1300e-9, mats)


def test_wire_pitch_validation():
    with pytest.raises(ConfigError, match="pitch"):
        sk.NanowireArray(4, 100e-9, 80e-9, 4.3e-9)
    sk.NanowireArray(1, 100e-9, 0.0, 4.3e-9)  # single wire: pitch unused


def test_stack_substrate_flag():
    with pytest.raises(ConfigError, match="substrate"):
        sk.LayerStack((sk.Layer("GaAs", 1e-6),))
    with pytest.raises(ConfigError, match="substrate"):
        sk.LayerStack((
            sk.Layer("GaAs", substrate=True),
            sk.Layer("AlGaAs", 1e-6, substrate=True),
        ))


def test_min_clearance_constant():
    assert MIN_CLEARANCE_M == pytest.approx(1.5e-6)
