"""Project configuration: JSON schema ingestion and validation.

Schema rules: unknown keys are rejected everywhere; every physical quantity
carries its unit in the key name (``_nm``, ``_um``, ``_pH_per_sq``, ...).
Lengths accept any of the ``_nm/_um/_mm/_m`` suffixes, exactly one per
field. Internal computation is SI throughout; conversion happens only here.

The config digest (sha256 of the canonical JSON) is stamped into every
output file header. Per-stage random seeds derive from the single global
seed by stable hashing, so stages are reproducible without cross-coupling.
"""

import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field
from pathlib import Path

from .detector import DetectorModel
from .errors import ConfigError
from .fabry_perot import FringeData
from .geometry import CrossSection, Layer, LayerStack, NanowireArray, ResolutionPolicy, RidgeSpec
from .materials import Material, default_materials, make_builtin_material
from .modes import SolverConfig
from .sweep import SweepParameter, SweepSpec

_LENGTH_UNITS = {"nm": 1e-9, "um": 1e-6, "mm": 1e-3, "m": 1.0}
_TIME_UNITS = {"ps": 1e-12, "ns": 1e-9, "us": 1e-6, "s": 1.0}

DEFAULT_TARGETS = {
    "alpha_per_cm": {"value": 451.0, "rel_tol": 0.15},
    "absorptance_51um": {"value": 0.90, "abs_tol": 0.005},
    "absorptance_102um": {"value": 0.99, "abs_tol": 0.002},
    "kinetic_inductance_nH": {"value": 180.0, "rel_tol": 1e-12},
    "tau_ns": {"value": 3.6, "rel_tol": 1e-12},
    "recovery_3tau": {"value": 0.950, "abs_tol": 0.001},
    "max_rate_MHz": {"value": 1e3 / (3.0 * 3.6), "rel_tol": 1e-9},
    "coupling": {"value": 0.174, "abs_tol": 0.001},
    "dqe": {"value": 0.197, "abs_tol": 0.002},
    "sqe": {"value": 0.034, "abs_tol": 0.001},
    "jitter_intrinsic_ps": {"value": 61.1, "abs_tol": 0.1},
    "sqe_slope_rel_tol": 0.03,
    "tm_alpha_min_per_cm": 500.0,
}


def _check_keys(obj: dict, allowed: set[str], ctx: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def _suffixed(obj: dict, base: str, units: dict[str, float], ctx: str,
              required: bool = True, default: float | None = None) -> float | None:
    hits = [(k, units[k.rsplit("_", 1)[-1]]) for k in obj
            if k.startswith(base + "_") and k.rsplit("_", 1)[-1] in units
            and k[: -len(k.rsplit("_", 1)[-1]) - 1] == base]
    if len(hits) > 1:
        raise ConfigError(f"{ctx}: {base} given in multiple units: {[h[0] for h in hits]}")
    if not hits:
        if required:
            raise ConfigError(f"{ctx}: missing {base}_<{'|'.join(units)}>")
        return default
    key, scale = hits[0]
    value = obj[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{ctx}: {key} must be a number")
    return float(value) * scale


def _length(obj, base, ctx, required=True, default=None):
    return _suffixed(obj, base, _LENGTH_UNITS, ctx, required, default)


def _length_keys(base: str) -> set[str]:
    return {f"{base}_{u}" for u in _LENGTH_UNITS}


def _number(obj: dict, key: str, ctx: str, required: bool = True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(f"{ctx}: missing {key}")
        return default
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{ctx}: {key} must be a number")
    return float(v)


@dataclass(frozen=True)
class CountingSpec:
    powers_w: tuple[float, ...]
    duration_s: float
    jitter_sigma_s: float


@dataclass(frozen=True, eq=False)
class ProjectConfig:
    raw: dict = field(repr=False)
    digest: str = ""
    seed: int = 0
    output_dir: str = "runs"
    cross_section: CrossSection = None
    policy: ResolutionPolicy = None
    solver: SolverConfig = None
    detector: DetectorModel = None
    fringes: FringeData = None
    pulse_rise_s: float = 200e-12
    pulse_fwhm_target_s: float | None = None
    counting: CountingSpec = None
    jitter_total_s: float = 73e-12
    jitter_source_s: float = 40e-12
    sweeps: tuple[SweepSpec, ...] = ()
    targets: dict = field(default_factory=dict)

    def stage_seed(self, stage: str) -> int:
        return stable_seed(self.seed, stage)


def stable_seed(global_seed: int, stage: str) -> int:
    payload = f"{global_seed}::{stage}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little") % (2**63)


def config_digest(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(canon).hexdigest()[:16]


# ---------------------------------------------------------------------------
# section parsers
# ---------------------------------------------------------------------------

def _parse_materials(entries, aluminum_fraction: float) -> dict[str, Material]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("materials: must be a non-empty list")
    mats: dict[str, Material] = {}
    for k, entry in enumerate(entries):
        ctx = f"materials[{k}]"
        _check_keys(entry, {"name", "builtin", "table_nm", "aluminum_fraction"}, ctx)
        name = entry.get("name")
        if not name:
            raise ConfigError(f"{ctx}: missing name")
        if ("builtin" in entry) == ("table_nm" in entry):
            raise ConfigError(f"{ctx}: exactly one of 'builtin' or 'table_nm' required")
        if "builtin" in entry:
            frac = entry.get("aluminum_fraction", aluminum_fraction)
            mats[name] = make_builtin_material(name, entry["builtin"], frac)
        else:
            rows = entry["table_nm"]
            try:
                wl = tuple(float(r[0]) * 1e-9 for r in rows)
                idx = tuple(complex(float(r[1]), -float(r[2])) for r in rows)
            except (TypeError, IndexError, ValueError) as exc:
                raise ConfigError(f"{ctx}: table_nm rows must be [wavelength_nm, n, k]") from exc
            mats[name] = Material(name, wl, idx)
    return mats


def _parse_layers(entries) -> tuple[Layer, ...]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("layers: must be a non-empty list")
    layers = []
    for k, entry in enumerate(entries):
        ctx = f"layers[{k}]"
        _check_keys(entry, {"material", "substrate"} | _length_keys("thickness"), ctx)
        substrate = bool(entry.get("substrate", False))
        thickness = _length(entry, "thickness", ctx, required=not substrate)
        layers.append(Layer(entry["material"], thickness, substrate))
    return tuple(layers)


def _parse_ridge(obj) -> RidgeSpec:
    ctx = "ridge"
    _check_keys(obj, _length_keys("width") | _length_keys("etch_depth") | _length_keys("center"), ctx)
    return RidgeSpec(
        width_m=_length(obj, "width", ctx),
        etch_depth_m=_length(obj, "etch_depth", ctx),
        center_m=_length(obj, "center", ctx, required=False, default=0.0),
    )


def _parse_wires(obj) -> NanowireArray:
    ctx = "wires"
    allowed = ({"count", "material", "cap_material"} | _length_keys("width")
               | _length_keys("pitch") | _length_keys("thickness")
               | _length_keys("cap_thickness") | _length_keys("offset"))
    _check_keys(obj, allowed, ctx)
    count = obj.get("count")
    if not isinstance(count, int) or isinstance(count, bool):
        raise ConfigError(f"{ctx}: count must be an integer")
    return NanowireArray(
        count=count,
        width_m=_length(obj, "width", ctx),
        pitch_m=_length(obj, "pitch", ctx, required=count > 1, default=_length(obj, "width", ctx)),
        thickness_m=_length(obj, "thickness", ctx),
        material=obj.get("material", "NbN"),
        cap_material=obj.get("cap_material"),
        cap_thickness_m=_length(obj, "cap_thickness", ctx, required=False, default=0.0),
        offset_m=_length(obj, "offset", ctx, required=False, default=0.0),
    )


def _parse_policy(obj) -> ResolutionPolicy:
    ctx = "solver.policy"
    allowed = (_length_keys("base") | _length_keys("fine") | _length_keys("band")
               | _length_keys("edge_band") | _length_keys("far") | _length_keys("far_margin")
               | _length_keys("x_base") | {"growth"})
    _check_keys(obj, allowed, ctx)
    kwargs = {}
    for name, attr in (("base", "base_m"), ("fine", "fine_m"), ("band", "band_m"),
                       ("edge_band", "edge_band_m"), ("far", "far_m"),
                       ("far_margin", "far_margin_m"), ("x_base", "x_base_m")):
        v = _length(obj, name, ctx, required=False)
        if v is not None:
            kwargs[attr] = v
    if "growth" in obj:
        kwargs["growth"] = _number(obj, "growth", ctx)
    return ResolutionPolicy(**kwargs)


def _parse_solver(obj) -> tuple[SolverConfig, ResolutionPolicy]:
    ctx = "solver"
    _check_keys(obj, {"num_modes", "target_n_eff", "tolerance", "max_iterations", "policy"}, ctx)
    policy = _parse_policy(obj.get("policy", {}))
    num_modes = obj.get("num_modes", 8)
    if not isinstance(num_modes, int) or isinstance(num_modes, bool):
        raise ConfigError(f"{ctx}: num_modes must be an integer")
    cfg = SolverConfig(
        num_modes=num_modes,
        target_n_eff=_number(obj, "target_n_eff", ctx, required=False),
        tolerance=_number(obj, "tolerance", ctx, required=False, default=1e-10),
        max_iterations=int(_number(obj, "max_iterations", ctx, required=False, default=400)),
    )
    return cfg, policy


def _parse_detector(obj) -> DetectorModel:
    ctx = "detector"
    allowed = ({"wire_count", "sheet_inductance_pH_per_sq", "load_resistance_ohm",
                "critical_current_uA", "bias_current_uA", "internal_efficiency",
                "dark_counts", "tc_K", "delta_tc_mK"}
               | _length_keys("length") | _length_keys("width"))
    _check_keys(obj, allowed, ctx)
    ie = obj.get("internal_efficiency", {})
    _check_keys(ie, {"eta_max", "midpoint", "width"}, f"{ctx}.internal_efficiency")
    dc = obj.get("dark_counts", {})
    _check_keys(dc, {"prefactor_hz", "slope"}, f"{ctx}.dark_counts")
    wire_count = obj.get("wire_count", 4)
    if not isinstance(wire_count, int) or isinstance(wire_count, bool):
        raise ConfigError(f"{ctx}: wire_count must be an integer")
    return DetectorModel(
        wire_count=wire_count,
        wire_length_m=_length(obj, "length", ctx),
        wire_width_m=_length(obj, "width", ctx),
        sheet_inductance_H=_number(obj, "sheet_inductance_pH_per_sq", ctx) * 1e-12,
        load_resistance_ohm=_number(obj, "load_resistance_ohm", ctx),
        critical_current_A=_number(obj, "critical_current_uA", ctx) * 1e-6,
        bias_current_A=_number(obj, "bias_current_uA", ctx) * 1e-6,
        eta_max=_number(ie, "eta_max", ctx, required=False, default=0.22),
        bias_midpoint=_number(ie, "midpoint", ctx, required=False, default=0.65),
        bias_width=_number(ie, "width", ctx, required=False, default=0.07),
        dark_rate_prefactor_hz=_number(dc, "prefactor_hz", ctx, required=False, default=1e-2),
        dark_rate_slope=_number(dc, "slope", ctx, required=False, default=15.0),
        tc_K=_number(obj, "tc_K", ctx, required=False, default=10.0),
        delta_tc_K=_number(obj, "delta_tc_mK", ctx, required=False, default=650.0) * 1e-3,
    )


def _parse_sweeps(entries) -> tuple[SweepSpec, ...]:
    specs = []
    for k, entry in enumerate(entries):
        ctx = f"sweeps[{k}]"
        _check_keys(entry, {"parameters", "mode", "point_cap"} | _length_keys("min_margin"), ctx)
        params = []
        for j, p in enumerate(entry.get("parameters", [])):
            _check_keys(p, {"name", "start", "stop", "step"}, f"{ctx}.parameters[{j}]")
            params.append(SweepParameter(
                p.get("name"), _number(p, "start", ctx), _number(p, "stop", ctx),
                _number(p, "step", ctx),
            ))
        specs.append(SweepSpec(
            parameters=tuple(params),
            mode_kind=entry.get("mode", "TE"),
            min_margin_m=_length(entry, "min_margin", ctx, required=False, default=0.5e-6),
            point_cap=int(entry.get("point_cap", 10_000)),
        ))
    return tuple(specs)


def _parse_targets(obj) -> dict:
    _check_keys(obj, set(DEFAULT_TARGETS), "targets")
    merged = {}
    for key, default in DEFAULT_TARGETS.items():
        if isinstance(default, dict):
            given = obj.get(key, {})
            _check_keys(given, {"value", "rel_tol", "abs_tol"}, f"targets.{key}")
            merged[key] = {**default, **given}
        else:
            merged[key] = obj.get(key, default)
    return merged


_TOP_KEYS = {
    "version", "seed", "output_dir", "aluminum_fraction", "wavelength_nm",
    "materials", "layers", "ambient", "ridge", "wires", "window", "solver",
    "detector", "fringes", "pulse", "counting", "jitter", "sweeps", "targets",
}


def load_project_config(source: str | Path | dict) -> ProjectConfig:
    """Parse and validate a configuration document (path or dict)."""
    if isinstance(source, dict):
        raw = source
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {source}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {source} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")

    aluminum_fraction = _number(raw, "aluminum_fraction", "config", required=False, default=0.75)
    wavelength = _number(raw, "wavelength_nm", "config") * 1e-9

    materials = (_parse_materials(raw["materials"], aluminum_fraction)
                 if "materials" in raw else default_materials(aluminum_fraction))
    stack = LayerStack(_parse_layers(raw["layers"]), ambient=raw.get("ambient", "air"))
    ridge = _parse_ridge(raw.get("ridge", {}))
    wires = _parse_wires(raw["wires"]) if raw.get("wires") else None

    window = raw.get("window", {})
    _check_keys(window, _length_keys("width") | _length_keys("height"), "window")
    cs = CrossSection(
        stack=stack, ridge=ridge, wires=wires,
        window_width_m=_length(window, "width", "window"),
        window_height_m=_length(window, "height", "window"),
        wavelength_m=wavelength,
        materials=materials,
    )

    solver_cfg, policy = _parse_solver(raw.get("solver", {}))
    detector = _parse_detector(raw["detector"]) if "detector" in raw else DetectorModel()

    fr = raw.get("fringes", {"t_max": 0.061, "t_min": 0.018})
    _check_keys(fr, {"t_max", "t_min", "single_pass"}, "fringes")
    fringes = FringeData(
        t_max=_number(fr, "t_max", "fringes"),
        t_min=_number(fr, "t_min", "fringes"),
        single_pass=_number(fr, "single_pass", "fringes", required=False, default=1.0),
    )

    pu = raw.get("pulse", {})
    _check_keys(pu, {"rise_ps", "fwhm_target_ns"}, "pulse")
    pulse_rise = _number(pu, "rise_ps", "pulse", required=False, default=200.0) * 1e-12
    fwhm_target = _number(pu, "fwhm_target_ns", "pulse", required=False)
    pulse_fwhm = None if fwhm_target is None else fwhm_target * 1e-9

    co = raw.get("counting", {})
    _check_keys(co, {"powers_pW", "duration_s", "jitter_ps"}, "counting")
    powers = co.get("powers_pW", [0.05 * 100 ** (k / 9.0) for k in range(10)])
    counting = CountingSpec(
        powers_w=tuple(float(p) * 1e-12 for p in powers),
        duration_s=_number(co, "duration_s", "counting", required=False, default=0.2),
        jitter_sigma_s=_number(co, "jitter_ps", "counting", required=False, default=73.0) * 1e-12,
    )

    ji = raw.get("jitter", {})
    _check_keys(ji, {"total_ps", "source_ps"}, "jitter")

    seed = raw.get("seed", 20120515)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("config: seed must be an integer")

    return ProjectConfig(
        raw=raw,
        digest=config_digest(raw),
        seed=seed,
        output_dir=str(raw.get("output_dir", "runs")),
        cross_section=cs,
        policy=policy,
        solver=solver_cfg,
        detector=detector,
        fringes=fringes,
        pulse_rise_s=pulse_rise,
        pulse_fwhm_target_s=pulse_fwhm,
        counting=counting,
        jitter_total_s=_number(ji, "total_ps", "jitter", required=False, default=73.0) * 1e-12,
        jitter_source_s=_number(ji, "source_ps", "jitter", required=False, default=40.0) * 1e-12,
        sweeps=_parse_sweeps(raw.get("sweeps", [])),
        targets=_parse_targets(raw.get("targets", {})),
    )


def default_config_path() -> Path:
    """Location of the shipped default configuration."""
    return Path(str(importlib.resources.files("snspdkit") / "data" / "default_config.json"))
