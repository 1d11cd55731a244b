"""Parameter sweeps and constrained maximization of modal absorption.

Each sweep point rebuilds the cross-section with the requested parameter
values, solves for the selected mode, and records absorption, polarization
and the wire-to-ridge alignment margin. Points that violate the margin
constraint are still evaluated but flagged infeasible; points whose
geometry cannot be built or whose solve fails are kept in the output with a
failure status. The optimizer runs a coarse grid pass followed by interval
halving around the best feasible point; unimodality is only a refinement
heuristic, and the returned dominance guarantee is over evaluated points.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .errors import ConfigError, ConvergenceError, DomainError
from .geometry import CrossSection, Layer, ResolutionPolicy, alignment_margin
from .modes import SolverConfig, modal_absorption, select_mode, solve_cross_section

PARAMETERS = (
    "core_thickness_nm",
    "ridge_width_nm",
    "etch_depth_nm",
    "wire_count",
    "array_offset_nm",
    "wavelength_nm",
)


@dataclass(frozen=True)
class SweepParameter:
    name: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if self.name not in PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {self.name!r}; known: {PARAMETERS}")
        if self.step <= 0:
            raise ConfigError("sweep step must be > 0")
        if self.stop < self.start:
            raise ConfigError("sweep stop must be >= start")

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + k * self.step for k in range(n)]


@dataclass(frozen=True)
class SweepSpec:
    parameters: tuple[SweepParameter, ...]
    mode_kind: str = "TE"                 # fundamental TE-like | first TM-like
    min_margin_m: float = 0.5e-6          # alignment-margin constraint
    point_cap: int = 10_000

    def __post_init__(self):
        if not self.parameters:
            raise ConfigError("sweep needs at least one parameter")
        if self.mode_kind.upper() not in ("TE", "TM"):
            raise ConfigError("mode kind must be 'TE' or 'TM'")
        if self.min_margin_m < 0:
            raise ConfigError("margin constraint must be >= 0")


@dataclass(frozen=True)
class SweepPoint:
    params: dict[str, float]
    n_eff: complex | None
    alpha_per_cm: float | None
    te_fraction: float | None
    margin_m: float | None
    feasible: bool
    status: str                           # "ok" | "no-mode" | "failed: ..."


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    best: SweepPoint | None

    def __post_init__(self):
        if self.best is not None:
            assert self.best.feasible and self.best.status == "ok"
            for p in self.points:
                if p.feasible and p.status == "ok":
                    assert self.best.alpha_per_cm >= p.alpha_per_cm


def apply_parameters(base: CrossSection, values: dict[str, float]) -> CrossSection:
    """Cross-section with the given sweep parameters applied."""
    cs = base
    for name, val in values.items():
        if name == "core_thickness_nm":
            layers = list(cs.stack.layers)
            layers[-1] = Layer(layers[-1].material, val * 1e-9, False)
            cs = replace(cs, stack=replace(cs.stack, layers=tuple(layers)))
        elif name == "ridge_width_nm":
            cs = replace(cs, ridge=replace(cs.ridge, width_m=val * 1e-9))
        elif name == "etch_depth_nm":
            cs = replace(cs, ridge=replace(cs.ridge, etch_depth_m=val * 1e-9))
        elif name == "wire_count":
            if cs.wires is None:
                raise ConfigError("wire_count sweep on a cross-section without wires")
            cs = replace(cs, wires=replace(cs.wires, count=int(round(val))))
        elif name == "array_offset_nm":
            if cs.wires is None:
                raise ConfigError("array_offset sweep on a cross-section without wires")
            cs = replace(cs, wires=replace(cs.wires, offset_m=val * 1e-9))
        elif name == "wavelength_nm":
            cs = replace(cs, wavelength_m=val * 1e-9)
        else:
            raise ConfigError(f"unknown sweep parameter {name!r}")
    return cs


def _default_evaluate(base, spec, policy, solver_config):
    """Real evaluation path: build, solve, select, measure."""

    def evaluate(values: dict[str, float]):
        cs = apply_parameters(base, values)
        margin = alignment_margin(cs.ridge, cs.wires) if cs.wires is not None else None
        mode = select_mode(solve_cross_section(cs, policy, solver_config), spec.mode_kind)
        if mode is None:
            return None, None, None, margin
        return mode.n_eff, modal_absorption(mode), mode.te_fraction, margin

    return evaluate


def _evaluate_point(values, spec, evaluate):
    try:
        n_eff, alpha, te, margin = evaluate(values)
    except (ConfigError, DomainError, ConvergenceError) as exc:
        return SweepPoint(values, None, None, None, None, False, f"failed: {exc}")
    feasible = margin is None or margin >= spec.min_margin_m
    if alpha is None:
        return SweepPoint(values, None, None, None, margin, feasible, "no-mode")
    return SweepPoint(values, n_eff, alpha, te, margin, feasible, "ok")


def run_sweep(
    base: CrossSection,
    spec: SweepSpec,
    policy: ResolutionPolicy | None = None,
    solver_config: SolverConfig | None = None,
    evaluate=None,
    workers: int = 1,
) -> SweepResult:
    """Evaluate the Cartesian product of the parameter ranges.

    Output row order follows the deterministic product order regardless of
    worker completion order. ``evaluate`` may be injected for testing; it
    receives the parameter dict and returns (n_eff, alpha_per_cm,
    te_fraction, margin_m).
    """
    axes = [p.values() for p in spec.parameters]
    names = [p.name for p in spec.parameters]
    n_points = math.prod(len(a) for a in axes)
    if n_points > spec.point_cap:
        raise ConfigError(
            f"sweep would evaluate {n_points} points, above the cap {spec.point_cap}"
        )
    if evaluate is None:
        evaluate = _default_evaluate(base, spec, policy, solver_config)

    combos = [dict(zip(names, vals)) for vals in itertools.product(*axes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda v: _evaluate_point(v, spec, evaluate), combos))
    else:
        points = [_evaluate_point(v, spec, evaluate) for v in combos]

    best = None
    for p in points:
        if p.status == "ok" and p.feasible:
            if best is None or p.alpha_per_cm > best.alpha_per_cm:
                best = p
    return SweepResult(tuple(points), best)


@dataclass(frozen=True)
class OptimizeResult:
    best: SweepPoint | None
    trace: tuple[SweepPoint, ...]        # every evaluation, in order
    status: str                          # "ok" | "infeasible"
    iterations: int


def maximize_alpha(
    base: CrossSection,
    spec: SweepSpec,
    policy: ResolutionPolicy | None = None,
    solver_config: SolverConfig | None = None,
    evaluate=None,
    tolerance: float = 5.0,              # parameter resolution, in the sweep unit (nm)
) -> OptimizeResult:
    """Constrained maximization of modal absorption over 1 or 2 parameters.

    Coarse grid pass over the declared ranges, then interval halving around
    the best feasible point until the step is below ``tolerance``; never
    evaluates outside the declared ranges. Returns an infeasibility result
    (not an exception) if no coarse point satisfies the margin constraint.
    """
    free = [p for p in spec.parameters if p.stop > p.start]
    if not 1 <= len(free) <= 2:
        raise ConfigError("refinement supports exactly 1 or 2 free parameters")
    if any(p.name == "wire_count" for p in free):
        raise ConfigError("wire_count is discrete; interval halving does not apply")
    fixed = {p.name: p.start for p in spec.parameters if p.stop <= p.start}
    if evaluate is None:
        evaluate = _default_evaluate(base, spec, policy, solver_config)

    trace: list[SweepPoint] = []
    seen: dict[tuple, SweepPoint] = {}

    def probe(values: dict[str, float]) -> SweepPoint:
        key = tuple(round(values[p.name], 6) for p in free)
        if key in seen:
            return seen[key]
        pt = _evaluate_point(values, spec, evaluate)
        seen[key] = pt
        trace.append(pt)
        return pt

    def better(a: SweepPoint | None, b: SweepPoint) -> SweepPoint | None:
        if b.status != "ok" or not b.feasible:
            return a
        if a is None or b.alpha_per_cm > a.alpha_per_cm:
            return b
        return a

    best = None
    for vals in itertools.product(*(p.values() for p in free)):
        best = better(best, probe({**fixed, **dict(zip((p.name for p in free), vals))}))
    if best is None:
        return OptimizeResult(None, tuple(trace), "infeasible", 0)

    steps = {p.name: p.step / 2.0 for p in free}
    iterations = 0
    while max(steps.values()) >= tolerance:
        iterations += 1
        center = best.params
        offsets = [(-1, 0, 1)] * len(free)
        for combo in itertools.product(*offsets):
            values = dict(fixed)
            for p, o in zip(free, combo):
                v = center[p.name] + o * steps[p.name]
                values[p.name] = min(max(v, p.start), p.stop)
            best = better(best, probe(values))
        steps = {k: v / 2.0 for k, v in steps.items()}

    return OptimizeResult(best, tuple(trace), "ok", iterations)
