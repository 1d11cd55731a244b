"""End-to-end benchmark pipeline: runs every reference computation from one
configuration and scores each result against its target band.

Stage graph: ``absorptance`` consumes the mode-solver result, ``efficiency``
consumes absorptance and the Fabry-Perot extraction; everything else is
independent. A failed stage fails its dependents ("blocked"); a skipped
stage marks them "not-run". The pipeline always runs to the end and the
manifest records every stage, its checks, outputs and seed.
"""

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__, detector as det
from .config import ProjectConfig
from .detector import EfficiencyBudget, SourceSpec, dark_count_rate, internal_efficiency
from .errors import SnspdKitError
from .fabry_perot import extract_coupling, fp_transmission, fresnel_reflectivity
from .io_utils import OutputDir, export_grid, export_mode_fields, json_header, write_csv, write_json
from .modes import modal_absorption, select_mode, solve_cross_section
from .sweep import apply_parameters

STAGES = ("mode-solver", "tm-design", "absorptance", "fp-extract",
          "efficiency", "pulse", "jitter", "counting")
_DEPENDENCIES = {
    "absorptance": ("mode-solver",),
    "efficiency": ("absorptance", "fp-extract"),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    lo: float
    hi: float

    @property
    def passed(self) -> bool:
        return self.lo <= self.value <= self.hi


@dataclass
class StageRecord:
    name: str
    status: str = "pending"     # pass | fail | blocked | skipped | not-run | error: ...
    checks: list[CheckResult] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    seed: int | None = None
    notes: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    tool_version: str
    config_digest: str
    started_utc: str
    finished_utc: str = ""
    stages: list[StageRecord] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(s.status in ("pass", "skipped", "not-run") for s in self.stages)

    def to_payload(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "config_digest": self.config_digest,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "all_pass": self.all_pass,
            "stages": [
                {
                    "name": s.name,
                    "status": s.status,
                    "seed": s.seed,
                    "outputs": s.outputs,
                    "notes": s.notes,
                    "checks": [
                        {"name": c.name, "value": c.value, "lo": c.lo, "hi": c.hi,
                         "passed": c.passed}
                        for c in s.checks
                    ],
                }
                for s in self.stages
            ],
        }


def band(target: dict) -> tuple[float, float]:
    value = target["value"]
    if "abs_tol" in target and target.get("abs_tol") is not None:
        tol = target["abs_tol"]
    else:
        tol = abs(value) * target["rel_tol"]
    return value - tol, value + tol


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def run_reproduce(config: ProjectConfig, out: OutputDir, skip: tuple[str, ...] = ()) -> RunManifest:
    """Run all stages, write per-stage data files and the summary table."""
    for name in skip:
        if name not in STAGES:
            raise SnspdKitError(f"unknown stage {name!r}; stages: {STAGES}")
    manifest = RunManifest(__version__, config.digest, _utc_now())
    records: dict[str, StageRecord] = {}
    results: dict[str, dict] = {}

    runners = {
        "mode-solver": _stage_mode_solver,
        "tm-design": _stage_tm_design,
        "absorptance": _stage_absorptance,
        "fp-extract": _stage_fp_extract,
        "efficiency": _stage_efficiency,
        "pulse": _stage_pulse,
        "jitter": _stage_jitter,
        "counting": _stage_counting,
    }

    for name in STAGES:
        rec = StageRecord(name=name)
        records[name] = rec
        manifest.stages.append(rec)
        if name in skip:
            rec.status = "skipped"
            continue
        deps = _DEPENDENCIES.get(name, ())
        if any(records[d].status in ("skipped", "not-run") for d in deps):
            rec.status = "not-run"
            continue
        if any(records[d].status not in ("pass",) for d in deps):
            rec.status = "blocked"
            continue
        try:
            runners[name](config, out, rec, results)
            rec.status = "pass" if all(c.passed for c in rec.checks) else "fail"
        except SnspdKitError as exc:
            rec.status = f"error: {exc}"

    manifest.finished_utc = _utc_now()
    summary_files = _write_summary(manifest, config, out)
    verify_manifest(manifest, out, extra=summary_files)
    return manifest


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _stage_mode_solver(config: ProjectConfig, out, rec, results):
    from .geometry import rasterize
    from .modes import assemble_operator, solve_modes

    grid = rasterize(config.cross_section, config.policy)
    modes = solve_modes(assemble_operator(grid), config.solver)
    te = select_mode(modes, "TE")
    alpha = 0.0 if te is None else modal_absorption(te)
    lo, hi = band(config.targets["alpha_per_cm"])
    rec.checks.append(CheckResult("alpha_per_cm", alpha, lo, hi))
    if te is not None:
        rec.notes["n_eff"] = {"re": te.n_eff.real, "im": te.n_eff.imag}
        rec.notes["te_fraction"] = te.te_fraction
        rec.notes["fresnel_reflectivity_estimate"] = fresnel_reflectivity(te.n_eff.real)
        rec.outputs += export_mode_fields(te, out, "mode_te0", config.digest)
    rec.outputs += export_grid(grid, out, "grid", config.digest)
    results["mode-solver"] = {"alpha_per_cm": alpha, "mode": te}


def _stage_tm_design(config: ProjectConfig, out, rec, results):
    base = config.cross_section
    t_nm = base.stack.top_layer.thickness_m * 1e9 + 50.0
    thick = apply_parameters(base, {"core_thickness_nm": t_nm})
    tm = select_mode(solve_cross_section(thick, config.policy, config.solver), "TM")
    alpha = 0.0 if tm is None else modal_absorption(tm)
    rec.checks.append(CheckResult(
        "tm_alpha_per_cm", alpha, config.targets["tm_alpha_min_per_cm"], math.inf))
    if tm is not None:
        rec.notes["n_eff"] = {"re": tm.n_eff.real, "im": tm.n_eff.imag}
        rec.notes["te_fraction"] = tm.te_fraction
    rec.notes["core_thickness_nm"] = t_nm
    results["tm-design"] = {"alpha_per_cm": alpha}


def _stage_absorptance(config: ProjectConfig, out, rec, results):
    alpha_ref = config.targets["alpha_per_cm"]["value"]
    a51 = det.absorptance(alpha_ref, 51e-4)
    a102 = det.absorptance(alpha_ref, 102e-4)
    rec.checks.append(CheckResult("absorptance_51um", a51, *band(config.targets["absorptance_51um"])))
    rec.checks.append(CheckResult("absorptance_102um", a102, *band(config.targets["absorptance_102um"])))
    alpha_solved = results["mode-solver"]["alpha_per_cm"]
    rec.notes["alpha_reference_per_cm"] = alpha_ref
    rec.notes["absorptance_51um_at_solved_alpha"] = det.absorptance(alpha_solved, 51e-4)
    lengths = np.linspace(0.0, 150e-4, 151)
    rows = [(length * 1e4, det.absorptance(alpha_ref, length), det.absorptance(alpha_solved, length))
            for length in lengths]
    p = out.path("absorptance_vs_length.csv")
    write_csv(p, ["length_um", "absorptance_at_reference_alpha", "absorptance_at_solved_alpha"],
              rows, config.digest)
    rec.outputs.append(p.name)
    results["absorptance"] = {"a51": a51}


def _stage_fp_extract(config: ProjectConfig, out, rec, results):
    res = extract_coupling(config.fringes)
    rec.checks.append(CheckResult("coupling", res.coupling, *band(config.targets["coupling"])))
    rec.notes.update({
        "facet_reflectivity": res.facet_reflectivity,
        "mode_match": res.mode_match,
        "contrast": res.contrast,
    })
    phases = np.linspace(0.0, 4.0 * np.pi, 401)
    rows = [(p, fp_transmission(res.facet_reflectivity, res.mode_match,
                                config.fringes.single_pass, p)) for p in phases]
    f = out.path("fp_fringe_model.csv")
    write_csv(f, ["phase_rad", "transmission"], rows, config.digest)
    rec.outputs.append(f.name)
    results["fp-extract"] = {"coupling": res.coupling}


def _stage_efficiency(config: ProjectConfig, out, rec, results):
    coupling = results["fp-extract"]["coupling"]
    a_ref = config.targets["absorptance_51um"]["value"]
    dqe_ref = config.targets["dqe"]["value"]
    eta_int = det.invert_internal(dqe_ref, a_ref)
    budget = EfficiencyBudget(coupling, a_ref, eta_int)
    rec.checks.append(CheckResult("sqe", budget.sqe, *band(config.targets["sqe"])))
    rec.notes.update({"coupling": coupling, "absorptance": a_ref,
                      "internal_efficiency": eta_int, "dqe": budget.dqe})
    model = config.detector
    scale = eta_int / internal_efficiency(model, 0.95)
    biases = np.linspace(0.4, 0.99, 60)
    rows = [(i,
             internal_efficiency(model, i) * scale * a_ref,
             internal_efficiency(model, i) * scale * a_ref * coupling,
             dark_count_rate(model, i)) for i in biases]
    f = out.path("efficiency_vs_bias.csv")
    write_csv(f, ["bias_fraction", "dqe_model", "sqe_model", "dark_rate_hz"], rows, config.digest)
    rec.outputs.append(f.name)
    results["efficiency"] = {"budget": budget}


def _stage_pulse(config: ProjectConfig, out, rec, results):
    model = config.detector
    lkin = det.kinetic_inductance(model)
    tau = det.recovery_time_constant(model)
    rec.checks.append(CheckResult("kinetic_inductance_nH", lkin * 1e9,
                                  *band(config.targets["kinetic_inductance_nH"])))
    rec.checks.append(CheckResult("tau_ns", tau * 1e9, *band(config.targets["tau_ns"])))
    rec.checks.append(CheckResult("recovery_3tau", det.recovery_fraction(3 * tau, tau),
                                  *band(config.targets["recovery_3tau"])))
    rec.checks.append(CheckResult("max_rate_MHz", det.max_count_rate(model) / 1e6,
                                  *band(config.targets["max_rate_MHz"])))
    trace = det.pulse_shape(model, config.pulse_rise_s)
    rec.notes["fwhm_ns"] = trace.fwhm_s * 1e9
    rec.notes["decay_time_1e_ns"] = trace.decay_time_1e_s * 1e9
    if config.pulse_fwhm_target_s is not None:
        fitted = det.fit_rise_for_fwhm(model, config.pulse_fwhm_target_s)
        rec.notes["rise_fit_for_fwhm_ns"] = fitted * 1e9
    f = out.path("pulse_trace.csv")
    write_csv(f, ["t_ns", "v_norm"],
              zip(trace.time_s * 1e9, trace.voltage), config.digest)
    rec.outputs.append(f.name)
    results["pulse"] = {"tau": tau}


def _stage_jitter(config: ProjectConfig, out, rec, results):
    intrinsic = det.jitter_deconvolve(config.jitter_total_s, config.jitter_source_s)
    rec.checks.append(CheckResult("jitter_intrinsic_ps", intrinsic * 1e12,
                                  *band(config.targets["jitter_intrinsic_ps"])))
    rec.notes["total_ps"] = config.jitter_total_s * 1e12
    rec.notes["source_ps"] = config.jitter_source_s * 1e12
    results["jitter"] = {"intrinsic": intrinsic}


def _stage_counting(config: ProjectConfig, out, rec, results):
    model = config.detector
    a_ref = config.targets["absorptance_51um"]["value"]
    dqe_ref = config.targets["dqe"]["value"]
    budget = EfficiencyBudget(config.targets["coupling"]["value"], a_ref,
                              det.invert_internal(dqe_ref, a_ref))
    seed0 = config.stage_seed("counting")
    rec.seed = seed0
    wavelength = config.cross_section.wavelength_m
    records = []
    for k, power in enumerate(config.counting.powers_w):
        src = SourceSpec(power, wavelength, config.counting.jitter_sigma_s)
        records.append(det.simulate_counting(model, budget, src,
                                             config.counting.duration_s, seed0 + k))
    sqe_est, slope, intercept = det.estimate_sqe_from_sweep(
        list(config.counting.powers_w), records, wavelength)
    tol = config.targets["sqe_slope_rel_tol"]
    rec.checks.append(CheckResult("sqe_recovered_over_input", sqe_est / budget.sqe,
                                  1.0 - tol, 1.0 + tol))
    rec.notes.update({"sqe_input": budget.sqe, "sqe_recovered": sqe_est,
                      "dark_intercept_hz": intercept})
    rows = [(p * 1e12, len(r) / config.counting.duration_s)
            for p, r in zip(config.counting.powers_w, records)]
    f = out.path("count_rate_vs_power.csv")
    write_csv(f, ["power_pW", "rate_hz"], rows, config.digest)
    rec.outputs.append(f.name)
    results["counting"] = {"sqe_recovered": sqe_est}


# ---------------------------------------------------------------------------
# summary and verification
# ---------------------------------------------------------------------------

def _write_summary(manifest: RunManifest, config: ProjectConfig, out: OutputDir) -> list[str]:
    rows = []
    for s in manifest.stages:
        if not s.checks:
            rows.append([s.name, "", "", "", "", s.status])
        for c in s.checks:
            rows.append([s.name, c.name, c.value, c.lo,
                         "inf" if math.isinf(c.hi) else c.hi,
                         "pass" if c.passed else s.status])
    p = out.path("summary.csv")
    write_csv(p, ["stage", "check", "value", "target_lo", "target_hi", "status"],
              rows, config.digest)
    j = out.path("summary.json")
    write_json(j, manifest.to_payload(), config.digest)
    return [p.name, j.name]


def verify_manifest(manifest: RunManifest, out: OutputDir, extra: list[str] = ()) -> None:
    """Every listed output exists and carries the config digest in its header."""
    from .io_utils import header_line
    import json as _json

    names = [name for s in manifest.stages for name in s.outputs] + list(extra)
    for name in names:
        path = out.base / name
        if not path.exists():
            raise SnspdKitError(f"manifest lists missing output {name}")
        if name.endswith(".json"):
            with open(path, encoding="utf-8") as fh:
                head = _json.load(fh).get("_header", {})
            if head.get("config_digest") != manifest.config_digest:
                raise SnspdKitError(f"output {name} lacks the config digest header")
        else:
            with open(path, encoding="utf-8") as fh:
                first = fh.readline().rstrip("\n")
            if first != header_line(manifest.config_digest):
                raise SnspdKitError(f"output {name} lacks the config digest header")


def write_manifest(manifest: RunManifest, config: ProjectConfig, out: OutputDir) -> str:
    p = out.base / "run_manifest.json"
    payload = {"_header": json_header(config.digest), **manifest.to_payload()}
    from .io_utils import canonical_json
    with open(p, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(payload) + "\n")
    return str(p)
