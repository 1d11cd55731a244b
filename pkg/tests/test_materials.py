import math

import numpy as np
import pytest

from snspdkit.errors import DomainError, WavelengthRangeError
from snspdkit.materials import (
    Material,
    algaas_index,
    default_materials,
    gaas_index,
    lookup_index,
    make_builtin_material,
    silica_index,
)

EV = 1.602176634e-19
HC = 6.62607015e-34 * 299792458.0


def afromowitz_oracle(wavelength_m, x):
    """Independent transcription of the published single-oscillator model."""
    e = HC / wavelength_m / EV
    e0 = 3.65 + 0.871 * x + 0.179 * x * x
    ed = 36.1 - 2.45 * x
    eg = 1.424 + 1.266 * x + 0.26 * x * x
    eta = math.pi * ed / (2 * e0**3 * (e0**2 - eg**2))
    n2 = (1 + ed / e0 + ed * e * e / e0**3
          + (eta / math.pi) * e**4 * math.log((2 * e0**2 - eg**2 - e * e) / (eg**2 - e * e)))
    return math.sqrt(n2)


def test_nbn_lookup_at_1300nm():
    mats = default_materials()
    assert lookup_index(mats["NbN"], 1300e-9) == complex(5.23, -5.82)


def test_single_entry_material_identity():
    m = Material("probe", (1310e-9,), (complex(2.5, -0.25),))
    assert lookup_index(m, 1310e-9) == complex(2.5, -0.25)
    with pytest.raises(WavelengthRangeError):
        lookup_index(m, 1311e-9)


def test_gaas_matches_published_model():
    # oracle value frozen from the independent transcription above
    assert afromowitz_oracle(1300e-9, 0.0) == pytest.approx(3.413022, abs=1e-6)
    mats = default_materials()
    got = lookup_index(mats["GaAs"], 1300e-9)
    assert got.real == pytest.approx(afromowitz_oracle(1300e-9, 0.0), abs=2e-5)
    assert got.imag == 0.0
    assert got.real == pytest.approx(3.41, abs=0.01)


def test_algaas_fraction_options():
    n75 = algaas_index(1300e-9, 0.75)
    n70 = algaas_index(1300e-9, 0.70)
    assert n75 == pytest.approx(afromowitz_oracle(1300e-9, 0.75), rel=1e-12)
    assert n70 > n75  # less aluminum, higher index
    assert gaas_index(1300e-9) > n70


def test_silica_index_value():
    # Malitson fused-silica fit at 1300 nm
    assert silica_index(1300e-9) == pytest.approx(1.4469, abs=2e-4)


def test_out_of_range_names_material():
    mats = default_materials()
    with pytest.raises(WavelengthRangeError, match="GaAs"):
        lookup_index(mats["GaAs"], 1500e-9)
    with pytest.raises(WavelengthRangeError, match="NbN"):
        lookup_index(mats["NbN"], 1200e-9)


def test_interpolation_exact_at_nodes_and_monotone_between():
    mats = default_materials()
    for mat in mats.values():
        wl = np.asarray(mat.wavelengths_m)
        idx = np.asarray(mat.indices)
        for w, n in zip(wl, idx):
            assert lookup_index(mat, float(w)) == pytest.approx(n, abs=0)
        # linear interpolation stays within the bracketing node values
        for k in range(len(wl) - 1):
            mid = 0.5 * (wl[k] + wl[k + 1])
            got = lookup_index(mat, float(mid)).real
            lo, hi = sorted((idx[k].real, idx[k + 1].real))
            assert lo - 1e-12 <= got <= hi + 1e-12


def test_material_invariants():
    with pytest.raises(DomainError):
        Material("empty", (), ())
    with pytest.raises(DomainError):
        Material("bad-order", (1300e-9, 1290e-9), (1.5 + 0j, 1.5 + 0j))
    with pytest.raises(DomainError):
        Material("gain", (1300e-9,), (complex(1.5, +0.1),))  # k < 0 forbidden
    with pytest.raises(DomainError):
        Material("nonphysical", (1300e-9,), (complex(-1.0, 0.0),))


def test_builtin_kinds():
    air = make_builtin_material("vac", "air")
    assert lookup_index(air, 1300e-9) == 1.0 + 0j
    with pytest.raises(DomainError):
        make_builtin_material("x", "unobtainium")


def test_algaas_transparency_guard():
    with pytest.raises(DomainError):
        algaas_index(800e-9, 0.0)  # above the GaAs gap
