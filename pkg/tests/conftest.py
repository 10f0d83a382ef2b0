import numpy as np
import pytest

import flatlayer as fl


@pytest.fixture(scope="session")
def tiny_grids():
    """Small grid pair for contract tests (fast kernel builds)."""
    cfg = fl.GridConfig(
        n_transverse=16,
        scatterer_z=(-0.5, 1.5),
        scatterer_nz=7,
        receiver_z=(6.01, 6.5),
        receiver_nz=5,
    )
    return fl.make_grids(cfg)


@pytest.fixture(scope="session")
def desk():
    """Desk-scale bundle at omega = 2: grids, kernels, forward solve, data.

    Shared by the forward/inverse/regularizer tests and the acceptance
    suite; computed once per session.
    """
    cfg = fl.GridConfig(n_transverse=64, scatterer_nz=31, receiver_nz=31)
    grid_x, grid_y = fl.make_grids(cfg)
    lattice = fl.ModeLattice.for_grid(grid_x)
    phantom = fl.Phantom.three_bumps(0.3)
    sources = fl.SourceSet.line_y(np.arange(-5.0, 5.5, 1.0))
    omega = 2.0
    xi_exact = phantom.sample_on(grid_x)
    kernel_xx = fl.build_green_kernel(grid_x, grid_x, omega, lattice)
    kernel_xy = fl.build_green_kernel(grid_x, grid_y, omega, lattice)
    u0 = fl.incident_field_spectral(sources, grid_x, omega, lattice)
    fwd = fl.born_iterate(u0, kernel_xx, phantom, omega)
    w_spec, w_field = fl.scattered_data(
        kernel_xy, omega, grid_y, u_spec=fwd.u_spec, xi_samples=xi_exact
    )
    return {
        "config": cfg,
        "grid_x": grid_x,
        "grid_y": grid_y,
        "lattice": lattice,
        "phantom": phantom,
        "sources": sources,
        "omega": omega,
        "xi_exact": xi_exact,
        "kernel_xx": kernel_xx,
        "kernel_xy": kernel_xy,
        "u0": u0,
        "forward": fwd,
        "w_spec": w_spec,
        "w_field": w_field,
    }


def reconstruct(desk, w_field, reg=None, eps_div=1e-3):
    """Run the inverse stage on given data; returns (extraction, curve)."""
    if reg is None:
        reg = fl.RegularizerConfig()
    grid_x = desk["grid_x"]
    v_spec, stats = fl.solve_modes(
        fl.forward_xy(w_field), desk["kernel_xy"], desk["omega"], reg, grid_x
    )
    u_spec = fl.recompute_internal_field(
        v_spec, desk["u0"], desk["kernel_xx"], desk["omega"]
    )
    ext = fl.extract_xi_single(fl.inverse_xy(v_spec), fl.inverse_xy(u_spec), eps_div)
    curve = fl.slice_relative_error(ext.xi, desk["xi_exact"], grid_x)
    return ext, curve, stats
