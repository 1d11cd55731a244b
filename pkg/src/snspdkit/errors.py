"""Error taxonomy shared by the library and the CLI.

Four classes, mapped to distinct CLI exit codes:

* config        -- malformed configuration, schema violations, resolution
                   policies that cannot satisfy grid invariants.
* domain        -- physically invalid argument values (negative lengths,
                   wavelengths outside a material table, ...).
* convergence   -- the eigensolver failed to converge or left residuals
                   above tolerance.
* inconsistency -- measured inputs that contradict each other (e.g. a
                   device efficiency larger than its absorptance).
"""


class SnspdKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SnspdKitError):
    exit_code = 2


class DomainError(SnspdKitError):
    exit_code = 3


class ConvergenceError(SnspdKitError):
    exit_code = 4

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InconsistencyError(SnspdKitError):
    exit_code = 5


class WavelengthRangeError(DomainError):
    """Wavelength outside a material's tabulated range; names the material."""

    def __init__(self, material: str, wavelength_m: float, lo_m: float, hi_m: float):
        self.material = material
        super().__init__(
            f"wavelength {wavelength_m * 1e9:.2f} nm outside the tabulated range "
            f"[{lo_m * 1e9:.2f}, {hi_m * 1e9:.2f}] nm of material {material!r}"
        )
