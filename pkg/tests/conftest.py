import time

import pytest

import snspdkit as sk
from snspdkit.config import default_config_path, load_project_config
from snspdkit.modes import solve_cross_section

# Expensive eigensolves are shared across test modules via session fixtures;
# each records its wall time so the acceptance tests can assert runtime bounds.


@pytest.fixture(scope="session")
def default_config():
    return load_project_config(default_config_path())


@pytest.fixture(scope="session")
def reference_solve(default_config):
    """Guided modes of the shipped detector geometry, with solve seconds."""
    cfg = default_config
    t0 = time.monotonic()
    modes = solve_cross_section(cfg.cross_section, cfg.policy, cfg.solver)
    return modes, time.monotonic() - t0


@pytest.fixture(scope="session")
def lossless_solve(default_config):
    """Same stack and ridge without the wire array (lossless)."""
    from dataclasses import replace

    cfg = default_config
    cs = replace(cfg.cross_section, wires=None)
    modes = solve_cross_section(cs, cfg.policy, cfg.solver)
    return cs, modes


@pytest.fixture(scope="session")
def slab_solve(default_config):
    """Buried symmetric slab in the wide-ridge limit, with solve seconds.

    The decorative shallow ridge keeps the cross-section contract satisfied
    while the buried core sees an essentially one-dimensional structure.
    """
    mats = default_config.cross_section.materials
    stack = sk.LayerStack((
        sk.Layer("GaAs", substrate=True),
        sk.Layer("AlGaAs", 1.5e-6),
        sk.Layer("GaAs", 300e-9),
        sk.Layer("AlGaAs", 1.5e-6),
    ))
    ridge = sk.RidgeSpec(width_m=52e-6, etch_depth_m=100e-9)
    cs = sk.CrossSection(stack, ridge, None, window_width_m=56e-6, window_height_m=6.5e-6,
                         wavelength_m=1300e-9, materials=mats)
    policy = sk.ResolutionPolicy(
        base_m=150e-9, fine_m=3e-9, x_base_m=400e-9, far_m=1000e-9,
        y_refine=((-1.83e-6, -1.47e-6, 3e-9),
                  (-2.6e-6, -1.83e-6, 12e-9),
                  (-1.47e-6, -0.7e-6, 12e-9)),
    )
    t0 = time.monotonic()
    modes = solve_cross_section(cs, policy, sk.SolverConfig(num_modes=4))
    return cs, modes, time.monotonic() - t0
