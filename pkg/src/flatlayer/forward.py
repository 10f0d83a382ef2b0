"""Iterative spectral solution of the scattering system and receiver-data synthesis.

Starting from the incident spectrum U0, the iteration

    U_{n+1} = U0 + w^2 * int G_hat(z - z') F[xi * F^-1[U_n]] dz'

runs per transverse mode with a trapezoid z'-quadrature, stopping when the
update norm falls below tol * ||U0||. The scattered receiver data W follows
from the converged interaction term V = F[xi * F^-1[U]] through the
scatterer-to-receiver kernel table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ComplexField, Grid3D, SpectralField, l2_norm, spectral_norm
from .medium import GreenKernelTable, Phantom, trapezoid_weights
from .spectral import forward_slab, inverse_slab, inverse_xy

# consecutive residual increases tolerated before declaring divergence
_GROWTH_LIMIT = 10


class DivergenceError(RuntimeError):
    """Born iteration left the contraction regime (residuals grow)."""


@dataclass(frozen=True)
class ForwardResult:
    """Converged internal spectrum plus iteration diagnostics."""

    u_spec: SpectralField
    iterations: int
    residual_history: np.ndarray  # per-iteration update norms ||U_n - U_{n-1}||
    converged: bool


def _interaction_spectral(
    u_values: np.ndarray, xi_samples: np.ndarray, grid: Grid3D
) -> np.ndarray:
    """V = F[xi * F^-1[U]] for spectral values of shape (n_modes, nz)."""
    nz, n = grid.nz, grid.nx
    slabs = inverse_slab(u_values.T.reshape(nz, n, n), grid)
    slabs *= np.moveaxis(xi_samples, 2, 0)
    return forward_slab(slabs, grid).reshape(nz, n * n).T


def interaction_spectral(
    u_spec: SpectralField, xi_samples: np.ndarray
) -> SpectralField:
    """Spectrum of the interaction term xi * u from the field spectrum."""
    grid = u_spec.grid
    if xi_samples.shape != grid.shape:
        raise ValueError("xi samples must live on the field's grid")
    return SpectralField(grid, _interaction_spectral(u_spec.values, xi_samples, grid))


def born_iterate(
    u0_spec: SpectralField,
    kernel_xx: GreenKernelTable,
    xi: Phantom | np.ndarray,
    omega: float,
    tol: float = 1e-13,
    max_iter: int = 1000,
) -> ForwardResult:
    """Fixed-point iteration for the internal field spectrum.

    Parameters
    ----------
    u0_spec : SpectralField
        Incident spectrum on the scatterer grid.
    kernel_xx : GreenKernelTable
        Scatterer-to-scatterer kernel table at the same omega.
    xi : Phantom or (nx, ny, nz) real ndarray
        Inhomogeneity coefficient (evaluated on the grid if a Phantom).
    tol : float
        Relative stopping tolerance ||U_n - U_{n-1}|| <= tol * ||U0||.
    max_iter : int
        Iteration cap; reaching it returns converged=False.

    Raises
    ------
    DivergenceError
        If the update norm grows over 10 consecutive iterations.
    """
    grid = u0_spec.grid
    if kernel_xx.n_rows != grid.nz or kernel_xx.n_cols != grid.nz:
        raise ValueError("kernel table does not cover the scatterer grid")
    xi_samples = xi.sample_on(grid) if isinstance(xi, Phantom) else np.asarray(xi)
    if xi_samples.shape != grid.shape:
        raise ValueError("xi samples must live on the scatterer grid")

    mu = trapezoid_weights(grid.z_nodes)
    u0 = u0_spec.values
    norm0 = spectral_norm(u0_spec)
    threshold = tol * norm0

    u = u0.copy()
    residuals: list[float] = []
    growth = 0
    converged = False
    for _ in range(max_iter):
        v = _interaction_spectral(u, xi_samples, grid)
        u_next = u0 + omega * omega * kernel_xx.convolve(v, mu)
        res = float(np.linalg.norm(u_next - u))
        residuals.append(res)
        u = u_next
        if res <= threshold:
            converged = True
            break
        if len(residuals) > 1 and res > residuals[-2]:
            growth += 1
            if growth >= _GROWTH_LIMIT:
                raise DivergenceError(
                    f"update norm grew for {growth} consecutive iterations "
                    f"(omega = {omega}; scatterer too strong for the Born series)"
                )
        else:
            growth = 0

    return ForwardResult(
        u_spec=SpectralField(grid, u),
        iterations=len(residuals),
        residual_history=np.asarray(residuals),
        converged=converged,
    )


def scattered_data(
    kernel_xy: GreenKernelTable,
    omega: float,
    recv_grid: Grid3D,
    v_spec: SpectralField | None = None,
    u_spec: SpectralField | None = None,
    xi_samples: np.ndarray | None = None,
) -> tuple[SpectralField, ComplexField]:
    """Receiver-layer data from the interaction spectrum.

    Either pass the interaction spectrum v_spec directly, or pass the
    internal-field spectrum u_spec together with xi_samples to form it.

    Returns
    -------
    (w_spec, w_field) : spectrum and field of W on the receiver grid.
    """
    if v_spec is None:
        if u_spec is None or xi_samples is None:
            raise ValueError("need either v_spec or (u_spec, xi_samples)")
        v_spec = interaction_spectral(u_spec, xi_samples)
    src_grid = v_spec.grid
    if kernel_xy.n_cols != src_grid.nz or kernel_xy.n_rows != recv_grid.nz:
        raise ValueError("kernel table shape does not match the grids")

    mu = trapezoid_weights(src_grid.z_nodes)
    w_values = omega * omega * kernel_xy.convolve(v_spec.values, mu)
    w_spec = SpectralField(recv_grid, w_values)
    return w_spec, inverse_xy(w_spec)


def add_noise(w_field: ComplexField, delta: float, seed: int) -> ComplexField:
    """Additive complex Gaussian noise scaled to an exact relative level.

    Independent real/imaginary normal deviates are rescaled so that
    ||W_noisy - W|| = delta * ||W|| in the volume-weighted L2 norm, making
    delta the measured data accuracy. delta = 0 returns the input unchanged.
    """
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if delta == 0.0:
        return w_field
    rng = np.random.default_rng(seed)
    shape = w_field.values.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    noise_field = ComplexField(w_field.grid, noise)
    scale = delta * l2_norm(w_field) / l2_norm(noise_field)
    return ComplexField(w_field.grid, w_field.values + scale * noise)
