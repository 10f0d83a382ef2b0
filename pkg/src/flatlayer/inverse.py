"""Reconstruction from receiver-layer data: per-mode solves, field
recomputation, and extraction of the inhomogeneity coefficient.

The measured spectrum W_hat decouples into independent 1D first-kind
systems, one per transverse mode. Their regularized solutions assemble the
interaction spectrum V_hat on the scatterer slab; the internal field U_hat
follows by one application of the scatterer-to-scatterer kernel; and the
coefficient comes from the pointwise identity u * xi = V, either per
frequency (division) or jointly over frequencies (least squares).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ComplexField, Grid3D, SpectralField
from .medium import GreenKernelTable, trapezoid_weights
from .regularizers import RegularizerConfig, solve_mode_block


@dataclass(frozen=True)
class ModeSolveStats:
    """Per-mode solver diagnostics for one frequency."""

    ranks: np.ndarray  # retained rank per mode
    failed_modes: int  # modes whose solve raised and were zero-filled

    def rank_histogram(self) -> dict[int, int]:
        uniq, counts = np.unique(self.ranks, return_counts=True)
        return {int(k): int(c) for k, c in zip(uniq, counts)}


@dataclass(frozen=True)
class XiExtraction:
    """Real coefficient field plus division diagnostics."""

    xi: np.ndarray  # real, shape (nx, ny, nz)
    imag_norm: float  # norm of the discarded imaginary residue
    masked_fraction: float  # fraction of nodes masked to the background


@dataclass(frozen=True)
class InversionResult:
    """All per-frequency reconstruction pieces plus the extracted coefficient."""

    frequencies: tuple[float, ...]
    v_fields: tuple[ComplexField, ...]
    u_fields: tuple[ComplexField, ...]
    xi: np.ndarray
    xi_imag_norm: float
    masked_fraction: float
    mode_stats: tuple[ModeSolveStats, ...]


def solve_modes(
    w_spec: SpectralField,
    kernel_xy: GreenKernelTable,
    omega: float,
    reg: RegularizerConfig,
    scatterer_grid: Grid3D,
    mode_chunk: int = 4096,
) -> tuple[SpectralField, ModeSolveStats]:
    """Solve the per-mode first-kind systems for the interaction spectrum.

    Parameters
    ----------
    w_spec : SpectralField
        Data spectrum on the receiver grid (forward transform of W).
    kernel_xy : GreenKernelTable
        Scatterer-to-receiver table at the same omega.
    reg : RegularizerConfig
    scatterer_grid : Grid3D
        Grid carrying the unknown V (defines the output SpectralField).
    mode_chunk : int
        Modes solved per batched SVD call (memory/speed trade-off only).

    Returns
    -------
    (v_spec, stats) : the assembled spectrum on the scatterer grid and
        per-mode diagnostics. Modes whose solve fails are zero-filled and
        counted rather than aborting the remaining modes.
    """
    n_modes = kernel_xy.n_modes
    if w_spec.values.shape != (n_modes, kernel_xy.n_rows):
        raise ValueError("data spectrum does not match the kernel table")
    if kernel_xy.n_cols != scatterer_grid.nz:
        raise ValueError("kernel table does not cover the scatterer grid")

    mu = trapezoid_weights(scatterer_grid.z_nodes)
    scale = omega * omega * mu  # column scaling of every mode matrix
    v_values = np.zeros((n_modes, scatterer_grid.nz), dtype=complex)
    ranks = np.zeros(n_modes, dtype=int)
    failed = 0
    for start in range(0, n_modes, mode_chunk):
        stop = min(start + mode_chunk, n_modes)
        # gather only this chunk of modes: (n_rows, n_cols, chunk) -> (chunk, rows, cols)
        mats = kernel_xy.values[kernel_xy.offset_index, start:stop].transpose(2, 0, 1)
        mats = mats * scale[None, None, :]
        rhs = w_spec.values[start:stop]
        try:
            x, k = solve_mode_block(mats, rhs, reg)
            v_values[start:stop] = x
            ranks[start:stop] = k
        except np.linalg.LinAlgError:
            # batched solve failed: fall back per mode, zero-filling losers
            for m in range(start, stop):
                try:
                    x, k = solve_mode_block(
                        mats[m - start : m - start + 1], rhs[m - start : m - start + 1], reg
                    )
                    v_values[m] = x[0]
                    ranks[m] = k[0]
                except np.linalg.LinAlgError:
                    failed += 1
    stats = ModeSolveStats(ranks=ranks, failed_modes=failed)
    return SpectralField(scatterer_grid, v_values), stats


def recompute_internal_field(
    v_spec: SpectralField,
    u0_spec: SpectralField,
    kernel_xx: GreenKernelTable,
    omega: float,
) -> SpectralField:
    """Internal-field spectrum U = U0 + w^2 int G_hat V dz' on the scatterer slab."""
    grid = v_spec.grid
    if u0_spec.values.shape != v_spec.values.shape:
        raise ValueError("U0 and V spectra must share shape")
    if kernel_xx.n_rows != grid.nz or kernel_xx.n_cols != grid.nz:
        raise ValueError("kernel table does not cover the scatterer grid")
    mu = trapezoid_weights(grid.z_nodes)
    u = u0_spec.values + omega * omega * kernel_xx.convolve(v_spec.values, mu)
    return SpectralField(grid, u)


def _masked_ratio(
    num: np.ndarray, den: np.ndarray, mask: np.ndarray
) -> XiExtraction:
    ratio = np.zeros(num.shape, dtype=complex)
    np.divide(num, den, out=ratio, where=mask)
    xi = np.where(mask, ratio.real, 0.0)
    imag_norm = float(np.linalg.norm(np.where(mask, ratio.imag, 0.0)))
    masked = 1.0 - float(np.count_nonzero(mask)) / mask.size
    return XiExtraction(xi=xi, imag_norm=imag_norm, masked_fraction=masked)


def extract_xi_single(
    v_field: ComplexField, u_field: ComplexField, eps_div: float = 1e-3
) -> XiExtraction:
    """xi = Re(V / u) with the division masked where |u| is negligible.

    Nodes with |u| < eps_div * max|u| take the background value 0 (no NaN
    or Inf can escape); the imaginary residue of the division is reported
    as a quality diagnostic.
    """
    v = v_field.values
    u = u_field.values
    if v.shape != u.shape:
        raise ValueError("V and u must share a grid")
    mag = np.abs(u)
    mask = (mag >= eps_div * np.max(mag)) & (mag > 0.0)
    return _masked_ratio(v, u, mask)


def extract_xi_lsq(
    v_fields: list[ComplexField] | tuple[ComplexField, ...],
    u_fields: list[ComplexField] | tuple[ComplexField, ...],
    eps_div: float = 1e-3,
) -> XiExtraction:
    """Pointwise real least squares for xi over several frequencies.

    Minimizes sum_w |u_w xi - V_w|^2 over real xi:
    xi = Re(sum_w conj(u_w) V_w) / sum_w |u_w|^2, masked where the
    denominator falls below eps_div^2 of its maximum. With one frequency
    this reduces to extract_xi_single.
    """
    if len(v_fields) == 0 or len(v_fields) != len(u_fields):
        raise ValueError("need matching nonempty V and u field lists")
    shape = v_fields[0].values.shape
    num = np.zeros(shape, dtype=complex)
    den = np.zeros(shape, dtype=float)
    for vf, uf in zip(v_fields, u_fields):
        if vf.values.shape != shape or uf.values.shape != shape:
            raise ValueError("all fields must share one grid")
        num += np.conj(uf.values) * vf.values
        den += np.abs(uf.values) ** 2
    mask = (den >= (eps_div ** 2) * np.max(den)) & (den > 0.0)
    return _masked_ratio(num, den.astype(complex), mask)
