"""Full-vector finite-difference eigenmode solver on a nonuniform tensor grid.

The transverse magnetic-field components (Hx, Hy) at the grid nodes are the
eigenvector; the eigenvalue is beta^2 = (k0 * n_eff)^2. The stencil is the
standard full-vector scheme for isotropic media on a nonuniform rectangular
grid (Fallahkhair, Li & Murphy, J. Lightwave Technol. 26, 1423 (2008),
specialized to a diagonal, scalar permittivity): five-point blocks for
Hx-Hx and Hy-Hy plus the interface-induced Hx-Hy cross couplings, which
vanish in homogeneous regions and at purely horizontal or vertical
interfaces and act only around material corners.

Sign bookkeeping: grids store eps = (n - 1j*k)^2 (absorbing cells have a
negative imaginary part); the operator is assembled from conj(eps), i.e.
with the exp(-i w t) physics convention, so absorbing guided modes come out
with Im(n_eff) >= 0 and a positive power absorption coefficient
alpha = 4*pi*Im(n_eff)/lambda.

Zero-field (perfect-wall) boundaries: the modes of interest are bound and
decay well inside the mandated window clearance.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError, DomainError
from .geometry import CrossSection, PermittivityGrid, ResolutionPolicy, rasterize

_ARNOLDI_SEED = 718281828  # fixed start-vector seed: solves are deterministic
_DIELECTRIC_IM_CUT = 0.1   # |Im n| below this counts as a dielectric for bracketing


@dataclass(frozen=True)
class SolverConfig:
    num_modes: int = 8
    target_n_eff: float | None = None   # shift-invert target; default 0.98 * core index
    tolerance: float = 1e-10            # relative eigen-residual bound
    max_iterations: int = 400
    boundary: str = "zero"              # zero-field walls (only supported choice)

    def __post_init__(self):
        if self.num_modes < 1:
            raise ConfigError("num_modes must be >= 1")
        if self.tolerance <= 0:
            raise ConfigError("solver tolerance must be > 0")
        if self.boundary != "zero":
            raise ConfigError(f"unsupported boundary condition {self.boundary!r}")


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Assembled eigenproblem A [Hx; Hy] = beta^2 [Hx; Hy]."""

    matrix: sp.csc_matrix = field(repr=False)
    k0: float
    x_nodes_m: np.ndarray
    y_nodes_m: np.ndarray
    eps: np.ndarray = field(repr=False)   # solver-convention (conjugated) cell eps

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.x_nodes_m), len(self.y_nodes_m))

    def index_bracket(self) -> tuple[float, float]:
        """(cladding max, global max) of Re(n) for guided-mode bracketing.

        The cladding bound is the largest dielectric index strictly below the
        largest dielectric (core) index; lossy materials such as the nanowire
        metal only enter the global upper bound.
        """
        n_vals = np.sqrt(self.eps.ravel())
        re = n_vals.real
        n_high = float(re.max())
        diel = re[np.abs(n_vals.imag) < _DIELECTRIC_IM_CUT]
        n_core = float(diel.max())
        below = diel[diel < n_core - 1e-9]
        n_clad = float(below.max()) if below.size else 1.0
        return n_clad, n_high


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """One guided mode: complex effective index plus discrete field profiles.

    Hx, Hy (eigenvector) and the derived longitudinal Hz live on the grid
    nodes; Ex, Ey, Ez are derived at cell centers. Fields are normalized to
    unit guided power with a deterministic phase.
    """

    n_eff: complex
    k0: float
    x_nodes_m: np.ndarray
    y_nodes_m: np.ndarray
    hx: np.ndarray = field(repr=False)
    hy: np.ndarray = field(repr=False)
    hz: np.ndarray = field(repr=False)
    ex: np.ndarray = field(repr=False)
    ey: np.ndarray = field(repr=False)
    ez: np.ndarray = field(repr=False)
    # Share of transverse field energy carried by the horizontal E component,
    # evaluated through its magnetic-field proxy |Hy|^2 / (|Hx|^2 + |Hy|^2).
    # The proxy is impedance-paired with (Ex, Ey) and insensitive to the
    # corner-singular E cells at the metal wire edges, which otherwise
    # dominate the raw E-energy integral on refined grids.
    te_fraction: float = 0.0
    power_normalized: bool = True

    @property
    def beta(self) -> complex:
        """Propagation constant [1/m]."""
        return self.k0 * self.n_eff

    @property
    def alpha_per_m(self) -> float:
        """Modal power absorption coefficient [1/m]."""
        return 2.0 * self.k0 * self.n_eff.imag

    @property
    def wavelength_m(self) -> float:
        return 2.0 * np.pi / self.k0

    @property
    def polarization(self) -> str:
        return "TE" if self.te_fraction >= 0.5 else "TM"


def classify_polarization(mode: ModeSolution) -> tuple[str, float]:
    """('TE'|'TM', TE fraction). TE-like iff the horizontal component carries
    more than half of the transverse field energy (see ModeSolution.te_fraction
    for how the fraction is evaluated); ties go to TE."""
    return mode.polarization, mode.te_fraction


def modal_absorption(mode: ModeSolution, wavelength_m: float | None = None) -> float:
    """Power absorption coefficient alpha = 4*pi*Im(n_eff)/lambda in 1/cm."""
    lam = mode.wavelength_m if wavelength_m is None else wavelength_m
    return 4.0 * np.pi * mode.n_eff.imag / lam / 100.0


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------

def assemble_operator(grid: PermittivityGrid, wavelength_m: float | None = None) -> ModeOperator:
    """Build the sparse eigenproblem for the two transverse H components."""
    lam = grid.wavelength_m if wavelength_m is None else wavelength_m
    if lam <= 0:
        raise DomainError("wavelength must be > 0")
    nx_cells, ny_cells = grid.eps.shape
    if nx_cells < 3 or ny_cells < 3:
        raise ConfigError("grid too small: need >= 3 cells in each direction")

    x = np.asarray(grid.x_edges_m, dtype=float)
    y = np.asarray(grid.y_edges_m, dtype=float)
    nnx, nny = len(x), len(y)
    k0 = 2.0 * np.pi / lam

    # exp(-i w t) convention: absorbing cells get Im(eps) > 0
    eps_cells = np.conj(grid.eps)
    epsp = np.pad(eps_cells, 1, mode="edge")
    # quadrant cells around each node: 1=NW, 2=SW, 3=SE, 4=NE
    e1 = epsp[0:nnx, 1:nny + 1]
    e2 = epsp[0:nnx, 0:nny]
    e3 = epsp[1:nnx + 1, 0:nny]
    e4 = epsp[1:nnx + 1, 1:nny + 1]

    dx = np.diff(x)
    dy = np.diff(y)
    dxp = np.concatenate(([dx[0]], dx, [dx[-1]]))
    dyp = np.concatenate(([dy[0]], dy, [dy[-1]]))
    w = dxp[0:nnx][:, None] + np.zeros((1, nny))
    e = dxp[1:nnx + 1][:, None] + np.zeros((1, nny))
    s = dyp[0:nny][None, :] + np.zeros((nnx, 1))
    n = dyp[1:nny + 1][None, :] + np.zeros((nnx, 1))

    ns21 = n * e2 + s * e1
    ns34 = n * e3 + s * e4
    ew14 = e * e1 + w * e4
    ew23 = e * e2 + w * e3

    k2 = k0 * k0

    axxn = 2.0 * (e * e3 / ns34 + w * e2 / ns21) / (n * (e + w))
    axxs = 2.0 * (e * e4 / ns34 + w * e1 / ns21) / (s * (e + w))
    axxe = 2.0 / (e * (e + w)) + np.zeros_like(e1)
    axxw = 2.0 / (w * (e + w)) + np.zeros_like(e1)
    axxp = -axxn - axxs - axxe - axxw + k2 * (n + s) * (
        e4 * e3 * e / ns34 + e1 * e2 * w / ns21
    ) / (e + w)

    ayye = 2.0 * (n * e1 / ew14 + s * e2 / ew23) / (e * (n + s))
    ayyw = 2.0 * (n * e4 / ew14 + s * e3 / ew23) / (w * (n + s))
    ayyn = 2.0 / (n * (n + s)) + np.zeros_like(e1)
    ayys = 2.0 / (s * (n + s)) + np.zeros_like(e1)
    ayyp = -ayyn - ayys - ayye - ayyw + k2 * (e + w) * (
        e1 * e4 * n / ew14 + e2 * e3 * s / ew23
    ) / (n + s)

    cross = e2 * e4 - e1 * e3
    axyn = (e3 / ns34 - e2 / ns21 + s * cross / (ns21 * ns34)) / (e + w)
    axys = (e1 / ns21 - e4 / ns34 + n * cross / (ns21 * ns34)) / (e + w)
    axye = -2.0 * (e2 - e1) * w * w / (ns21 * e * (e + w) ** 2)
    axyw = -2.0 * (e4 - e3) * e * e / (ns34 * w * (e + w) ** 2)
    axyp = -(axyn + axys + axye + axyw)

    ayxe = (e1 / ew14 - e2 / ew23 + w * cross / (ew23 * ew14)) / (n + s)
    ayxw = (e3 / ew23 - e4 / ew14 + e * cross / (ew23 * ew14)) / (n + s)
    ayxn = -2.0 * (e2 - e3) * s * s / (ew23 * n * (n + s) ** 2)
    ayxs = -2.0 * (e4 - e1) * n * n / (ew14 * s * (n + s) ** 2)
    ayxp = -(ayxn + ayxs + ayxe + ayxw)

    nn = nnx * nny
    ii = np.arange(nn).reshape(nnx, nny)
    iall = ii.ravel()
    i_n = ii[:, :-1].ravel()   # rows whose north neighbor exists
    i_s = ii[:, 1:].ravel()
    i_e = ii[:-1, :].ravel()
    i_w = ii[1:, :].ravel()
    j_n = ii[:, 1:].ravel()
    j_s = ii[:, :-1].ravel()
    j_e = ii[1:, :].ravel()
    j_w = ii[:-1, :].ravel()

    def block(p, an, as_, ae, aw, row_off, col_off):
        rows = np.concatenate([iall, i_n, i_s, i_e, i_w]) + row_off
        cols = np.concatenate([iall, j_n, j_s, j_e, j_w]) + col_off
        vals = np.concatenate(
            [p.ravel()[iall], an.ravel()[i_n], as_.ravel()[i_s], ae.ravel()[i_e], aw.ravel()[i_w]]
        )
        return rows, cols, vals

    parts = [
        block(axxp, axxn, axxs, axxe, axxw, 0, 0),
        block(axyp, axyn, axys, axye, axyw, 0, nn),
        block(ayxp, ayxn, ayxs, ayxe, ayxw, nn, 0),
        block(ayyp, ayyn, ayys, ayye, ayyw, nn, nn),
    ]
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(2 * nn, 2 * nn)).tocsc()

    return ModeOperator(mat, k0, x, y, eps_cells)


# ---------------------------------------------------------------------------
# eigen-solve and field post-processing
# ---------------------------------------------------------------------------

def _centered(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[1:, 1:] + a[1:, :-1] + a[:-1, 1:] + a[:-1, :-1])


def _derive_fields(op: ModeOperator, beta: complex, hx: np.ndarray, hy: np.ndarray):
    """Hz at nodes from the divergence relation; E at cell centers from
    Ampere's law, D = i (curl H) / omega, with relative eps per cell."""
    x, y = op.x_nodes_m, op.y_nodes_m
    k0 = op.k0
    hz = 1j * (np.gradient(hx, x, axis=0) + np.gradient(hy, y, axis=1)) / beta

    dxc = np.diff(x)[:, None]
    dyc = np.diff(y)[None, :]
    hxc, hyc = _centered(hx), _centered(hy)
    dhz_dy = (hz[:-1, 1:] + hz[1:, 1:] - hz[:-1, :-1] - hz[1:, :-1]) / (2.0 * dyc)
    dhz_dx = (hz[1:, :-1] + hz[1:, 1:] - hz[:-1, :-1] - hz[:-1, 1:]) / (2.0 * dxc)
    dhy_dx = (hy[1:, :-1] + hy[1:, 1:] - hy[:-1, :-1] - hy[:-1, 1:]) / (2.0 * dxc)
    dhx_dy = (hx[:-1, 1:] + hx[1:, 1:] - hx[:-1, :-1] - hx[1:, :-1]) / (2.0 * dyc)

    # scaled fields: E_scaled = (eps0 * c) * E, so power = 0.5 Re(E x H*) / ...
    # carries no large constants; normalization below makes the scale moot.
    eps = op.eps
    ex = (beta * hyc + 1j * dhz_dy) / (k0 * eps)
    ey = -(beta * hxc + 1j * dhz_dx) / (k0 * eps)
    ez = 1j * (dhy_dx - dhx_dy) / (k0 * eps)
    return hz, ex, ey, ez


def solve_modes(op: ModeOperator, config: SolverConfig | None = None) -> list[ModeSolution]:
    """Guided eigenmodes nearest the shift-invert target.

    Returns guided modes (effective index inside the bracket given by
    :meth:`ModeOperator.index_bracket`) sorted by descending Re(n_eff);
    an empty list signals that no guided mode was found. Fields are
    normalized to unit power. Raises :class:`ConvergenceError` if the
    Arnoldi iteration fails or residuals exceed the configured tolerance.
    """
    if config is None:
        config = SolverConfig()
    n_clad, n_high = op.index_bracket()
    target = config.target_n_eff if config.target_n_eff is not None else 0.98 * _core_index(op)
    sigma = (op.k0 * target) ** 2

    nn = op.matrix.shape[0]
    k = min(config.num_modes, nn - 2)
    rng = np.random.default_rng(_ARNOLDI_SEED)
    v0 = rng.standard_normal(nn) + 1j * rng.standard_normal(nn)

    try:
        vals, vecs = spla.eigs(
            op.matrix, k=k, sigma=sigma, v0=v0, tol=0,
            maxiter=config.max_iterations, return_eigenvectors=True,
        )
    except spla.ArpackNoConvergence as exc:
        found = 0 if exc.eigenvalues is None else len(exc.eigenvalues)
        raise ConvergenceError(
            f"eigensolver did not converge within {config.max_iterations} iterations "
            f"({found}/{k} eigenvalues found)"
        ) from exc

    n_effs = np.sqrt(vals.astype(complex)) / op.k0
    order = np.argsort(-n_effs.real, kind="stable")

    nxn, nyn = op.shape
    modes = []
    for idx in order:
        n_eff = complex(n_effs[idx])
        if not (n_clad < n_eff.real < n_high):
            continue
        resid = _relative_residual(op.matrix, vals[idx], vecs[:, idx])
        if resid > config.tolerance:
            raise ConvergenceError(
                f"eigenpair residual {resid:.2e} exceeds tolerance {config.tolerance:.1e}",
                residual=resid,
            )
        hx = vecs[: nxn * nyn, idx].reshape(nxn, nyn)
        hy = vecs[nxn * nyn:, idx].reshape(nxn, nyn)
        modes.append(_finalize_mode(op, n_eff, hx, hy))
    return modes


def _core_index(op: ModeOperator) -> float:
    n_vals = np.sqrt(op.eps.ravel())
    diel = n_vals.real[np.abs(n_vals.imag) < _DIELECTRIC_IM_CUT]
    return float(diel.max())


def _relative_residual(mat, val, vec) -> float:
    r = mat @ vec - val * vec
    return float(np.linalg.norm(r) / (abs(val) * np.linalg.norm(vec)))


def _finalize_mode(op: ModeOperator, n_eff: complex, hx: np.ndarray, hy: np.ndarray) -> ModeSolution:
    beta = op.k0 * n_eff
    # deterministic phase: largest transverse H sample made real positive
    stacked = np.concatenate([hx.ravel(), hy.ravel()])
    pivot = stacked[np.argmax(np.abs(stacked))]
    phase = pivot / abs(pivot)
    hx = hx / phase
    hy = hy / phase

    hz, ex, ey, ez = _derive_fields(op, beta, hx, hy)
    if not all(np.all(np.isfinite(f)) for f in (hx, hy, hz, ex, ey, ez)):
        raise ConvergenceError("non-finite field values in computed mode")

    area = np.diff(op.x_nodes_m)[:, None] * np.diff(op.y_nodes_m)[None, :]
    hxc, hyc = _centered(hx), _centered(hy)
    power = 0.5 * float(np.sum((ex * np.conj(hyc) - ey * np.conj(hxc)).real * area))
    scale = 1.0 / np.sqrt(abs(power))
    hx, hy, hz = hx * scale, hy * scale, hz * scale
    ex, ey, ez = ex * scale, ey * scale, ez * scale

    e_h = float(np.sum(np.abs(hyc) ** 2 * area))
    e_v = float(np.sum(np.abs(hxc) ** 2 * area))
    te_fraction = e_h / (e_h + e_v)

    return ModeSolution(
        n_eff=n_eff, k0=op.k0,
        x_nodes_m=op.x_nodes_m, y_nodes_m=op.y_nodes_m,
        hx=hx, hy=hy, hz=hz, ex=ex, ey=ey, ez=ez,
        te_fraction=te_fraction,
    )


def mode_power(mode: ModeSolution) -> float:
    """Guided power of the stored fields (should be 1 after normalization)."""
    area = np.diff(mode.x_nodes_m)[:, None] * np.diff(mode.y_nodes_m)[None, :]
    hxc, hyc = _centered(mode.hx), _centered(mode.hy)
    return 0.5 * float(np.sum((mode.ex * np.conj(hyc) - mode.ey * np.conj(hxc)).real * area))


def select_mode(modes: list[ModeSolution], kind: str = "TE") -> ModeSolution | None:
    """Fundamental mode of the requested polarization: the highest-Re(n_eff)
    guided mode classified as ``kind``; None if there is none."""
    kind = kind.upper()
    if kind not in ("TE", "TM"):
        raise DomainError(f"mode kind must be 'TE' or 'TM', got {kind!r}")
    for mode in modes:  # already sorted by descending Re(n_eff)
        if mode.polarization == kind:
            return mode
    return None


def solve_cross_section(
    cs: CrossSection,
    policy: ResolutionPolicy | None = None,
    config: SolverConfig | None = None,
) -> list[ModeSolution]:
    """Rasterize, assemble and solve in one call."""
    grid = rasterize(cs, policy)
    op = assemble_operator(grid)
    return solve_modes(op, config)


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    base_cell_m: float
    n_eff: complex | None
    alpha_per_cm: float | None
    delta_alpha_rel: float | None
    status: str


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    order_estimate: float | None


def convergence_study(
    cs: CrossSection,
    policies: tuple[ResolutionPolicy, ...],
    config: SolverConfig | None = None,
    kind: str = "TE",
) -> ConvergenceTable:
    """Solve the fundamental mode on a ladder of grid policies (>= 3 levels,
    coarsest first; use ``ResolutionPolicy.refined`` / ``bulk_refined`` to
    build one). A level that fails to converge is marked in its row and
    excluded from the deltas; the Richardson order estimate is the
    least-squares slope of log successive-delta vs log base cell size.
    """
    if len(policies) < 3:
        raise ConfigError("convergence study needs at least 3 refinement levels")
    rows: list[ConvergenceRow] = []
    prev: tuple[float, float] | None = None   # (cell size, alpha) of last ok level
    deltas: list[tuple[float, float]] = []
    for policy in policies:
        cell = policy.base_m
        try:
            mode = select_mode(solve_cross_section(cs, policy, config), kind)
        except ConvergenceError as exc:
            rows.append(ConvergenceRow(cell, None, None, None, f"failed: {exc}"))
            continue
        if mode is None:
            rows.append(ConvergenceRow(cell, None, None, None, "no-mode"))
            continue
        alpha = modal_absorption(mode)
        delta = None
        if prev is not None:
            ref = abs(alpha) if abs(alpha) > 1e-12 else 1.0
            delta = abs(alpha - prev[1]) / ref
            deltas.append((prev[0], delta))
        rows.append(ConvergenceRow(cell, mode.n_eff, alpha, delta, "ok"))
        prev = (cell, alpha)

    order = None
    if len(deltas) >= 2 and all(d > 0 for _h, d in deltas):
        hs = np.log([h for h, _d in deltas])
        ds = np.log([d for _h, d in deltas])
        order = float(np.polyfit(hs, ds, 1)[0])
    return ConvergenceTable(tuple(rows), order)
