"""Command-line interface.

Every numeric flag carries its unit in its name. Each subcommand prints a
human-readable table by default or machine-readable JSON with ``--json``
(canonical form: parse -> re-serialize is byte-identical). Files are
written only under the output directory, resolved as: ``--out`` flag, then
the ``SNSPDKIT_OUT`` environment variable, then the config's
``output_dir``. Exit codes: 0 success; 2 config, 3 domain, 4 convergence,
5 inconsistency errors; 1 unexpected failure.
"""

import functools
import json
import os
import sys

import click

from . import __version__, detector as det
from .config import default_config_path, load_project_config
from .errors import SnspdKitError
from .fabry_perot import FringeData, extract_coupling, read_fringe_scan
from .io_utils import OutputDir, export_count_record, export_grid, export_mode_fields, sweep_to_rows, write_csv
from .modes import modal_absorption
from .pipeline import run_reproduce, write_manifest
from .sweep import maximize_alpha, run_sweep

ENV_OUTPUT_DIR = "SNSPDKIT_OUT"


def cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SnspdKitError as exc:
            click.echo(f"error ({type(exc).__name__}): {exc}", err=True)
            sys.exit(getattr(exc, "exit_code", 1))
    return wrapper


def emit(payload: dict, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True, separators=(",", ": "), indent=2))
    else:
        width = max(len(k) for k in payload)
        for key, value in payload.items():
            click.echo(f"{key.ljust(width)}  {value}")


def _resolve_out(flag_value: str | None, config=None) -> OutputDir:
    if flag_value:
        return OutputDir(flag_value)
    env = os.environ.get(ENV_OUTPUT_DIR)
    if env:
        return OutputDir(env)
    return OutputDir(config.output_dir if config is not None else "runs")


config_option = click.option(
    "--config", "config_path", type=click.Path(), default=None,
    help="Project config JSON (defaults to the shipped configuration).")
json_option = click.option("--json", "as_json", is_flag=True, help="Emit JSON on stdout.")
out_option = click.option("--out", "out_dir", type=click.Path(), default=None,
                          help="Output directory (overrides SNSPDKIT_OUT and the config).")


def _load(config_path):
    return load_project_config(config_path if config_path else default_config_path())


@click.group()
@click.version_option(__version__, prog_name="snspdkit")
def main():
    """Waveguide single-photon-detector design toolkit."""


@main.command("solve-mode")
@config_option
@click.option("--mode-index", type=int, default=0, help="Index into the guided-mode list (sorted by Re n_eff).")
@click.option("--dump-fields", is_flag=True, help="Write field matrices for the selected mode.")
@click.option("--dump-grid", is_flag=True, help="Write the permittivity grid and coordinates.")
@json_option
@out_option
@cli_errors
def cmd_solve_mode(config_path, mode_index, dump_fields, dump_grid, as_json, out_dir):
    """Solve guided modes of the configured cross-section."""
    from .errors import ConvergenceError, DomainError
    from .geometry import rasterize
    from .modes import assemble_operator, solve_modes

    config = _load(config_path)
    grid = rasterize(config.cross_section, config.policy)
    modes = solve_modes(assemble_operator(grid), config.solver)
    if not modes:
        raise ConvergenceError("no guided modes found in the search window")
    if not 0 <= mode_index < len(modes):
        raise DomainError(f"mode index {mode_index} out of range: {len(modes)} guided modes found")
    mode = modes[mode_index]
    payload = {
        "n_eff_re": mode.n_eff.real,
        "n_eff_im": mode.n_eff.imag,
        "alpha_per_cm": modal_absorption(mode),
        "te_fraction": mode.te_fraction,
        "polarization": mode.polarization,
        "guided_modes_found": len(modes),
    }
    if dump_fields or dump_grid:
        out = _resolve_out(out_dir, config)
        files = []
        if dump_fields:
            files += export_mode_fields(mode, out, f"mode{mode_index}", config.digest)
        if dump_grid:
            files += export_grid(grid, out, "grid", config.digest)
        payload["files"] = files
        payload["output_dir"] = str(out.base)
    emit(payload, as_json)


@main.command("absorptance")
@click.option("--alpha-per-cm", type=float, required=True)
@click.option("--length-um", type=float, required=True)
@json_option
@cli_errors
def cmd_absorptance(alpha_per_cm, length_um, as_json):
    """Beer-Lambert absorbed fraction after a propagation length."""
    value = det.absorptance(alpha_per_cm, length_um * 1e-4)
    emit({"alpha_per_cm": alpha_per_cm, "length_um": length_um, "absorptance": value}, as_json)


@main.command("pulse")
@click.option("--lsq-ph-per-sq", type=float, default=90.0, help="Sheet kinetic inductance [pH/square].")
@click.option("--wires", type=int, default=4)
@click.option("--length-um", type=float, default=50.0)
@click.option("--width-nm", type=float, default=100.0)
@click.option("--rload-ohm", type=float, default=50.0)
@click.option("--rise-ps", type=float, default=200.0)
@click.option("--fwhm-target-ns", type=float, default=None,
              help="Fit the rise constant that reproduces this measured FWHM.")
@click.option("--dump-trace", is_flag=True, help="Write the pulse trace CSV.")
@json_option
@out_option
@cli_errors
def cmd_pulse(lsq_ph_per_sq, wires, length_um, width_nm, rload_ohm, rise_ps,
              fwhm_target_ns, dump_trace, as_json, out_dir):
    """Kinetic-inductance pulse metrics and counting-rate ceiling."""
    model = det.DetectorModel(
        wire_count=wires, wire_length_m=length_um * 1e-6, wire_width_m=width_nm * 1e-9,
        sheet_inductance_H=lsq_ph_per_sq * 1e-12, load_resistance_ohm=rload_ohm,
    )
    trace = det.pulse_shape(model, rise_ps * 1e-12)
    tau = det.recovery_time_constant(model)
    payload = {
        "kinetic_inductance_nH": det.kinetic_inductance(model) * 1e9,
        "tau_ns": tau * 1e9,
        "recovery_at_3tau": det.recovery_fraction(3 * tau, tau),
        "max_count_rate_MHz": det.max_count_rate(model) / 1e6,
        "pulse_fwhm_ns": trace.fwhm_s * 1e9,
        "decay_time_1e_ns": trace.decay_time_1e_s * 1e9,
    }
    if fwhm_target_ns is not None:
        payload["rise_fit_for_fwhm_ns"] = det.fit_rise_for_fwhm(model, fwhm_target_ns * 1e-9) * 1e9
    if dump_trace:
        out = _resolve_out(out_dir)
        p = out.path("pulse_trace.csv")
        write_csv(p, ["t_ns", "v_norm"], zip(trace.time_s * 1e9, trace.voltage))
        payload["files"] = [p.name]
        payload["output_dir"] = str(out.base)
    emit(payload, as_json)


@main.command("fp-extract")
@click.option("--tmax", type=float, default=None, help="Maximum fringe transmission.")
@click.option("--tmin", type=float, default=None, help="Minimum fringe transmission.")
@click.option("--single-pass", type=float, default=1.0,
              help="Assumed single-pass propagation transmission (default 1).")
@click.option("--scan-csv", type=click.Path(), default=None,
              help="Fringe scan CSV (wavelength_nm, transmission); extrema by 95th/5th percentile.")
@json_option
@cli_errors
def cmd_fp_extract(tmax, tmin, single_pass, scan_csv, as_json):
    """Facet reflectivity and coupling efficiency from fringe extrema."""
    from .errors import DomainError

    if scan_csv is not None:
        fringes = read_fringe_scan(scan_csv, single_pass)
    elif tmax is not None and tmin is not None:
        fringes = FringeData(tmax, tmin, single_pass)
    else:
        raise DomainError("give either --tmax and --tmin, or --scan-csv")
    res = extract_coupling(fringes)
    emit({
        "t_max": fringes.t_max,
        "t_min": fringes.t_min,
        "contrast": res.contrast,
        "facet_reflectivity": res.facet_reflectivity,
        "mode_match": res.mode_match,
        "coupling": res.coupling,
    }, as_json)


@main.command("efficiency")
@click.option("--coupling", type=float, default=None)
@click.option("--absorptance", "absorptance_", type=float, required=True)
@click.option("--internal", type=float, default=None)
@click.option("--dqe", type=float, default=None,
              help="Measured DQE; inverts to the internal efficiency instead of taking --internal.")
@json_option
@cli_errors
def cmd_efficiency(coupling, absorptance_, internal, dqe, as_json):
    """Efficiency chain SQE = coupling x absorptance x internal."""
    from .errors import DomainError

    if (internal is None) == (dqe is None):
        raise DomainError("give exactly one of --internal or --dqe")
    if internal is None:
        internal = det.invert_internal(dqe, absorptance_)
    payload = {"absorptance": absorptance_, "internal": internal,
               "dqe": absorptance_ * internal}
    if coupling is not None:
        budget = det.efficiency_chain(coupling, absorptance_, internal)
        payload.update({"coupling": coupling, "dqe": budget.dqe, "sqe": budget.sqe})
    emit(payload, as_json)


@main.command("jitter")
@click.option("--total-ps", type=float, required=True)
@click.option("--source-ps", type=float, required=True)
@json_option
@cli_errors
def cmd_jitter(total_ps, source_ps, as_json):
    """Intrinsic jitter from total and source jitter (quadrature model)."""
    intrinsic = det.jitter_deconvolve(total_ps * 1e-12, source_ps * 1e-12)
    emit({"total_ps": total_ps, "source_ps": source_ps,
          "intrinsic_ps": intrinsic * 1e12}, as_json)


@main.command("counts")
@config_option
@click.option("--power-pw", type=float, required=True)
@click.option("--duration-s", type=float, default=0.1)
@click.option("--seed", type=int, default=None, help="Override the derived stage seed.")
@json_option
@out_option
@cli_errors
def cmd_counts(config_path, power_pw, duration_s, seed, as_json, out_dir):
    """Simulate a counting run and persist the event record."""
    config = _load(config_path)
    a_ref = config.targets["absorptance_51um"]["value"]
    budget = det.EfficiencyBudget(
        config.targets["coupling"]["value"], a_ref,
        det.invert_internal(config.targets["dqe"]["value"], a_ref))
    src = det.SourceSpec(power_pw * 1e-12, config.cross_section.wavelength_m,
                         config.counting.jitter_sigma_s)
    used_seed = config.stage_seed("counts") if seed is None else seed
    record = det.simulate_counting(config.detector, budget, src, duration_s, used_seed)
    out = _resolve_out(out_dir, config)
    files = export_count_record(record, out, "counts", config.digest)
    emit({
        "events": len(record),
        "measured_rate_hz": len(record) / duration_s,
        "expected_rate_hz": det.expected_count_rate(
            power_pw * 1e-12, config.cross_section.wavelength_m, budget.sqe,
            det.dead_time(config.detector), det.dark_count_rate(config.detector)),
        "seed": used_seed,
        "files": files,
        "output_dir": str(out.base),
    }, as_json)


@main.command("sweep")
@config_option
@click.option("--index", type=int, default=0, help="Which sweep spec from the config to run.")
@click.option("--workers", type=int, default=1)
@json_option
@out_option
@cli_errors
def cmd_sweep(config_path, index, workers, as_json, out_dir):
    """Run a configured parameter sweep and export the table."""
    from .errors import ConfigError

    config = _load(config_path)
    if not 0 <= index < len(config.sweeps):
        raise ConfigError(f"sweep index {index} out of range: config has {len(config.sweeps)} sweeps")
    result = run_sweep(config.cross_section, config.sweeps[index],
                       config.policy, config.solver, workers=workers)
    out = _resolve_out(out_dir, config)
    columns, rows = sweep_to_rows(result)
    p = out.path(f"sweep_{index}.csv")
    write_csv(p, columns, rows, config.digest)
    best = result.best
    emit({
        "points": len(result.points),
        "feasible_ok": sum(1 for q in result.points if q.feasible and q.status == "ok"),
        "best_alpha_per_cm": None if best is None else best.alpha_per_cm,
        "best_params": None if best is None else best.params,
        "files": [p.name],
        "output_dir": str(out.base),
    }, as_json)


@main.command("optimize")
@config_option
@click.option("--index", type=int, default=0, help="Which sweep spec from the config to refine.")
@click.option("--tolerance-nm", type=float, default=5.0)
@json_option
@out_option
@cli_errors
def cmd_optimize(config_path, index, tolerance_nm, as_json, out_dir):
    """Maximize modal absorption under the alignment-margin constraint."""
    from .errors import ConfigError

    config = _load(config_path)
    if not 0 <= index < len(config.sweeps):
        raise ConfigError(f"sweep index {index} out of range: config has {len(config.sweeps)} sweeps")
    result = maximize_alpha(config.cross_section, config.sweeps[index],
                            config.policy, config.solver, tolerance=tolerance_nm)
    out = _resolve_out(out_dir, config)
    from .sweep import SweepResult
    columns, rows = sweep_to_rows(SweepResult(result.trace, None))
    p = out.path(f"optimize_{index}_trace.csv")
    write_csv(p, columns, rows, config.digest)
    best = result.best
    emit({
        "status": result.status,
        "iterations": result.iterations,
        "evaluations": len(result.trace),
        "best_alpha_per_cm": None if best is None else best.alpha_per_cm,
        "best_params": None if best is None else best.params,
        "best_margin_um": None if best is None or best.margin_m is None else best.margin_m * 1e6,
        "files": [p.name],
        "output_dir": str(out.base),
    }, as_json)


@main.command("reproduce-paper")
@config_option
@click.option("--skip", "skips", multiple=True,
              help="Stage to skip (repeatable); dependents are marked not-run.")
@json_option
@out_option
@cli_errors
def cmd_reproduce(config_path, skips, as_json, out_dir):
    """Run the full benchmark pipeline and score every reference target."""
    config = _load(config_path)
    out = _resolve_out(out_dir, config)
    manifest = run_reproduce(config, out, tuple(skips))
    write_manifest(manifest, config, out)
    payload = {
        "all_pass": manifest.all_pass,
        "output_dir": str(out.base),
        "stages": {s.name: s.status for s in manifest.stages},
    }
    emit(payload, as_json)
    if not as_json:
        for s in manifest.stages:
            for c in s.checks:
                mark = "PASS" if c.passed else "FAIL"
                click.echo(f"  [{mark}] {s.name}/{c.name}: {c.value:.6g} in [{c.lo:.6g}, {c.hi:.6g}]")
    if not manifest.all_pass:
        sys.exit(1)


if __name__ == "__main__":
    main()
