import pytest

from snspdkit.errors import ConfigError
from snspdkit.io_utils import sweep_to_rows
from snspdkit.sweep import (
    OptimizeResult,
    SweepParameter,
    SweepSpec,
    apply_parameters,
    maximize_alpha,
    run_sweep,
)


@pytest.fixture()
def base_cs(default_config):
    return default_config.cross_section


def synthetic(peak_nm=317.0, margin_floor=0.3e-6):
    """Analytic stand-in for the solver: unimodal alpha over core thickness,
    margin decreasing with array offset."""

    def evaluate(values):
        t = values.get("core_thickness_nm", 300.0)
        off = abs(values.get("array_offset_nm", 0.0))
        alpha = 500.0 - 0.02 * (t - peak_nm) ** 2
        margin = 0.5e-6 - off * 1e-9
        return complex(3.15, alpha * 1.3e-6 / (4e2 * 3.1415)), alpha, 0.95, margin

    return evaluate


def test_sweep_parameter_values():
    p = SweepParameter("core_thickness_nm", 300.0, 360.0, 20.0)
    assert p.values() == [300.0, 320.0, 340.0, 360.0]
    with pytest.raises(ConfigError):
        SweepParameter("bogus_nm", 0, 1, 1)
    with pytest.raises(ConfigError):
        SweepParameter("core_thickness_nm", 0, 1, -1)


def test_apply_parameters(base_cs):
    cs = apply_parameters(base_cs, {
        "core_thickness_nm": 350, "ridge_width_nm": 2000, "etch_depth_nm": 200,
        "wire_count": 3, "array_offset_nm": 50, "wavelength_nm": 1310,
    })
    assert cs.stack.top_layer.thickness_m == pytest.approx(350e-9)
    assert cs.ridge.width_m == pytest.approx(2e-6)
    assert cs.ridge.etch_depth_m == pytest.approx(200e-9)
    assert cs.wires.count == 3
    assert cs.wires.offset_m == pytest.approx(50e-9)
    assert cs.wavelength_m == pytest.approx(1310e-9)


def test_sweep_margin_tracks_offset(base_cs):
    spec = SweepSpec((SweepParameter("array_offset_nm", 0.0, 400.0, 100.0),))
    result = run_sweep(base_cs, spec, evaluate=synthetic())
    margins = [p.margin_m for p in result.points]
    assert margins == pytest.approx([0.5e-6 - k * 100e-9 for k in range(5)])
    feasible = [p.feasible for p in result.points]
    assert feasible == [True, False, False, False, False]  # constraint is 0.5 um
    alphas = {p.alpha_per_cm for p in result.points}
    assert len(alphas) == 1  # synthetic alpha does not move with offset


def test_sweep_point_cap(base_cs):
    spec = SweepSpec(
        (SweepParameter("core_thickness_nm", 0.0, 100.0, 1.0),
         SweepParameter("ridge_width_nm", 0.0, 1000.0, 1.0)),
        point_cap=1000,
    )
    with pytest.raises(ConfigError, match="101101 points"):
        run_sweep(base_cs, spec, evaluate=synthetic())


def test_sweep_best_dominates(base_cs):
    spec = SweepSpec(
        (SweepParameter("core_thickness_nm", 280.0, 360.0, 10.0),),
        min_margin_m=0.0,
    )
    result = run_sweep(base_cs, spec, evaluate=synthetic())
    assert result.best is not None
    assert result.best.params["core_thickness_nm"] == 320.0  # closest grid point to 317
    for p in result.points:
        if p.feasible and p.status == "ok":
            assert result.best.alpha_per_cm >= p.alpha_per_cm


def test_sweep_failed_points_survive(base_cs):
    def flaky(values):
        if values["core_thickness_nm"] == 300.0:
            raise ConfigError("synthetic failure")
        return synthetic()(values)

    spec = SweepSpec((SweepParameter("core_thickness_nm", 290.0, 310.0, 10.0),), min_margin_m=0.0)
    result = run_sweep(base_cs, spec, evaluate=flaky)
    statuses = [p.status for p in result.points]
    assert statuses[0] == "ok" and statuses[2] == "ok"
    assert statuses[1].startswith("failed:")
    assert result.best is not None


def test_sweep_deterministic_and_export(tmp_path, base_cs):
    spec = SweepSpec((SweepParameter("core_thickness_nm", 280.0, 360.0, 20.0),), min_margin_m=0.0)
    r1 = run_sweep(base_cs, spec, evaluate=synthetic())
    r2 = run_sweep(base_cs, spec, evaluate=synthetic(), workers=4)
    assert [p.params for p in r1.points] == [p.params for p in r2.points]
    assert [p.alpha_per_cm for p in r1.points] == [p.alpha_per_cm for p in r2.points]
    from snspdkit.io_utils import write_csv

    cols, rows = sweep_to_rows(r1)
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(f1, cols, rows, "d")
    cols, rows = sweep_to_rows(r2)
    write_csv(f2, cols, rows, "d")
    assert f1.read_bytes() == f2.read_bytes()


def test_sweep_real_path_offset_moves_alpha(default_config):
    """Through the real solver at coarse resolution: the margin falls
    linearly with |offset| while the absorption actually moves."""
    from snspdkit import ResolutionPolicy, SolverConfig

    cfg = default_config
    coarse = ResolutionPolicy(base_m=50e-9, band_m=30e-9, edge_band_m=12e-9,
                              far_m=125e-9, far_margin_m=400e-9)
    spec = SweepSpec((SweepParameter("array_offset_nm", 0.0, 200.0, 200.0),),
                     min_margin_m=0.5e-6)
    result = run_sweep(cfg.cross_section, spec, coarse, SolverConfig(num_modes=6))
    p0, p200 = result.points
    assert p0.status == p200.status == "ok"
    assert p0.margin_m == pytest.approx(0.5e-6, rel=1e-9)
    assert p200.margin_m == pytest.approx(0.3e-6, rel=1e-9)
    assert p0.feasible and not p200.feasible
    assert p0.alpha_per_cm != p200.alpha_per_cm


def test_optimize_recovers_synthetic_argmax(base_cs):
    spec = SweepSpec(
        (SweepParameter("core_thickness_nm", 260.0, 380.0, 40.0),),
        min_margin_m=0.0,
    )
    result = maximize_alpha(base_cs, spec, evaluate=synthetic(peak_nm=317.0), tolerance=5.0)
    assert result.status == "ok"
    assert result.best.params["core_thickness_nm"] == pytest.approx(317.0, abs=5.0)
    # dominance over every feasible evaluated point, straight from the trace
    for p in result.trace:
        if p.feasible and p.status == "ok":
            assert result.best.alpha_per_cm >= p.alpha_per_cm
    # refinement never leaves the declared range
    for p in result.trace:
        assert 260.0 <= p.params["core_thickness_nm"] <= 380.0


def test_optimize_respects_margin_constraint(base_cs):
    spec = SweepSpec(
        (SweepParameter("array_offset_nm", 0.0, 400.0, 100.0),),
        min_margin_m=0.35e-6,
    )

    def offset_loving(values):
        off = abs(values.get("array_offset_nm", 0.0))
        margin = 0.5e-6 - off * 1e-9
        return complex(3.15, 1e-3), 400.0 + off, 0.9, margin  # alpha grows with offset

    result = maximize_alpha(base_cs, spec, evaluate=offset_loving, tolerance=5.0)
    assert result.status == "ok"
    assert result.best.margin_m >= 0.35e-6 - 1e-15
    # unconstrained optimum (offset 400) is infeasible; best feasible is at the boundary
    assert result.best.params["array_offset_nm"] <= 150.0 + 1e-9


def test_optimize_infeasible_is_a_result(base_cs):
    spec = SweepSpec(
        (SweepParameter("array_offset_nm", 300.0, 400.0, 50.0),),
        min_margin_m=0.45e-6,
    )
    result = maximize_alpha(base_cs, spec, evaluate=synthetic(), tolerance=5.0)
    assert isinstance(result, OptimizeResult)
    assert result.status == "infeasible"
    assert result.best is None


def test_optimize_rejects_bad_freedom(base_cs):
    with pytest.raises(ConfigError, match="1 or 2 free"):
        maximize_alpha(base_cs, SweepSpec((
            SweepParameter("core_thickness_nm", 280.0, 360.0, 20.0),
            SweepParameter("ridge_width_nm", 1500.0, 2500.0, 100.0),
            SweepParameter("etch_depth_nm", 150.0, 300.0, 50.0),
        ), min_margin_m=0.0), evaluate=synthetic())
    with pytest.raises(ConfigError, match="wire_count"):
        maximize_alpha(base_cs, SweepSpec((
            SweepParameter("wire_count", 2.0, 8.0, 1.0),
        ), min_margin_m=0.0), evaluate=synthetic())
