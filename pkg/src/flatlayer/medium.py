"""Green's function, spectral kernel tables, point sources, and the model medium.

The free-space outgoing-wave kernel is G(rho, w) = -exp(i*w*rho/c0)/(4*pi*rho).
Its transverse spectrum G_hat(dz, w, Omega) is built numerically: sample G on
the (truncated, periodized) transverse lattice at fixed z-offset and apply the
slab Fourier transform. Tables store one spectrum slab per distinct z-offset,
since entries depend on z - z' only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid3D, SpectralField
from .spectral import ModeLattice, forward_slab

# offsets closer than this are the same physical z-difference
_OFFSET_DECIMALS = 10


def green_point(rho, omega: float, c0: float = 1.0):
    """Free-space Green's function -exp(i*omega*rho/c0) / (4*pi*rho).

    Parameters
    ----------
    rho : float or ndarray
        Source-observer distance, strictly positive.
    omega : float
        Angular frequency (rad per unit time).
    c0 : float
        Background sound speed.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("green_point requires rho > 0 (singular at rho = 0)")
    out = -np.exp(1j * omega * rho / c0) / (4.0 * np.pi * rho)
    return out if out.ndim else complex(out)


def green_cell_average(cell_area: float, omega: float, c0: float = 1.0) -> complex:
    """Mean of G over a disk with the given area, centred on the singularity.

    Closed form of (1/(pi a^2)) * int_0^a -exp(i k rho)/(4 pi rho) 2 pi rho drho;
    replaces the untabulatable rho = 0 sample while preserving the integrable
    singularity's cell average.
    """
    a = np.sqrt(cell_area / np.pi)
    k = omega / c0
    if abs(k * a) < 1e-8:
        integral = a * (1.0 + 0.5j * k * a)
    else:
        integral = (np.exp(1j * k * a) - 1.0) / (1j * k)
    return complex(-integral / (2.0 * np.pi * a * a))


@dataclass(frozen=True)
class GreenKernelTable:
    """Spectral Green's kernel G_hat(z_k - z'_l, omega, Omega) per mode.

    values[j, m] holds the mode-m spectrum for unique offset offsets[j];
    offset_index[k, l] maps a (receiver, source) node pair to its offset row.
    Tables are immutable and safe for concurrent reads.
    """

    omega: float
    row_z: np.ndarray  # receiver z-nodes
    col_z: np.ndarray  # source z-nodes
    offsets: np.ndarray  # unique z-differences, shape (n_off,)
    offset_index: np.ndarray  # shape (n_rows, n_cols) -> row of `values`
    values: np.ndarray  # shape (n_off, n_modes)

    @property
    def n_rows(self) -> int:
        return self.row_z.size

    @property
    def n_cols(self) -> int:
        return self.col_z.size

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    def entry(self, k: int, l: int) -> np.ndarray:
        """All-mode spectrum for the node pair (z_k, z'_l)."""
        return self.values[self.offset_index[k, l]]

    def mode_matrix(self, m: int) -> np.ndarray:
        """Dense (n_rows, n_cols) kernel matrix for a single mode."""
        return self.values[self.offset_index, m]

    def convolve(self, v: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Quadrature-weighted kernel application per mode.

        Computes out[m, k] = sum_l values[offset_index[k, l], m] * weights[l]
        * v[m, l], i.e. the discretized integral over z' for every mode and
        receiver node. The omega^2 prefactor is the caller's.

        Parameters
        ----------
        v : (n_modes, n_cols) complex ndarray
        weights : (n_cols,) quadrature weights

        Returns
        -------
        (n_modes, n_rows) complex ndarray
        """
        if v.shape != (self.n_modes, self.n_cols):
            raise ValueError(
                f"expected shape {(self.n_modes, self.n_cols)}, got {v.shape}"
            )
        vw = v * weights[None, :]
        out = np.empty((self.n_modes, self.n_rows), dtype=complex)
        # row-by-row gather keeps peak memory at one (n_cols, n_modes) block
        for k in range(self.n_rows):
            rows = self.values[self.offset_index[k]]  # (n_cols, n_modes)
            out[:, k] = np.einsum("lm,ml->m", rows, vw)
        return out


def trapezoid_weights(z_nodes: np.ndarray) -> np.ndarray:
    """Trapezoidal quadrature weights mu_l on a uniform z grid."""
    h = float(z_nodes[1] - z_nodes[0])
    w = np.full(z_nodes.size, h)
    w[0] = w[-1] = 0.5 * h
    return w


def sample_green_slabs(
    grid: Grid3D, dz_list: np.ndarray, omega: float, c0: float = 1.0
) -> np.ndarray:
    """Sample G on the transverse lattice for each z-offset in dz_list.

    The rho = 0 sample (possible only at zero offset with the origin on the
    lattice) is replaced by the analytic disk average of G over one cell.
    """
    x = grid.x_coords()
    y = grid.y_coords()
    rho2 = x[:, None] ** 2 + y[None, :] ** 2
    iox = int(np.argmin(np.abs(x)))
    ioy = int(np.argmin(np.abs(y)))
    origin_on_lattice = abs(x[iox]) < 1e-12 and abs(y[ioy]) < 1e-12

    dz = np.asarray(dz_list, dtype=float)
    r = np.sqrt(rho2[None, :, :] + dz[:, None, None] ** 2)
    singular = (np.abs(dz) < 1e-14) & origin_on_lattice
    if np.any(singular):
        r[singular, iox, ioy] = 1.0  # placeholder, overwritten below
    slabs = -np.exp(1j * (omega / c0) * r) / (4.0 * np.pi * r)
    if np.any(singular):
        slabs[singular, iox, ioy] = green_cell_average(grid.hx * grid.hy, omega, c0)
    return slabs


def build_green_kernel(
    grid_src: Grid3D,
    grid_recv: Grid3D,
    omega: float,
    lattice: ModeLattice,
    c0: float = 1.0,
) -> GreenKernelTable:
    """Tabulate G_hat(z_k - z'_l, omega, Omega) for all needed node pairs.

    One routine serves both the scatterer-to-scatterer and the
    scatterer-to-receiver tables; the grids must share the transverse
    lattice. Construction batches the slab FFTs over unique offsets.
    """
    if not grid_src.same_transverse_lattice(grid_recv):
        raise ValueError("source and receiver grids must share the transverse lattice")
    if lattice.nx != grid_src.nx:
        raise ValueError("mode lattice does not match the grids")

    row_z = np.asarray(grid_recv.z_nodes, dtype=float)
    col_z = np.asarray(grid_src.z_nodes, dtype=float)
    diff = np.round(row_z[:, None] - col_z[None, :], _OFFSET_DECIMALS)
    offsets, inverse = np.unique(diff, return_inverse=True)
    offset_index = inverse.reshape(diff.shape).astype(np.intp)

    n = grid_src.nx
    n_modes = n * n
    values = np.empty((offsets.size, n_modes), dtype=complex)
    block = max(1, 4_000_000 // n_modes)  # cap transient FFT batch memory
    for start in range(0, offsets.size, block):
        chunk = offsets[start : start + block]
        slabs = sample_green_slabs(grid_src, chunk, omega, c0)
        spec = forward_slab(slabs, grid_src)
        values[start : start + chunk.size] = spec.reshape(chunk.size, n_modes)

    for arr in (row_z, col_z, offsets, offset_index, values):
        arr.setflags(write=False)
    return GreenKernelTable(
        omega=float(omega),
        row_z=row_z,
        col_z=col_z,
        offsets=offsets,
        offset_index=offset_index,
        values=values,
    )


@dataclass(frozen=True)
class SourceSet:
    """Point (delta) sources: positions (n, 3) and complex amplitudes (n,)."""

    positions: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        amp = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        if pos.shape != (amp.size, 3):
            raise ValueError("positions must be (n, 3) matching n amplitudes")
        pos.setflags(write=False)
        amp.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def line_y(
        cls, y_values, x: float = 0.0, z: float = 6.0, amplitude: complex = 1.0
    ) -> "SourceSet":
        """Sources along a line of constant x and z, one per y value."""
        y = np.asarray(y_values, dtype=float)
        pos = np.column_stack([np.full_like(y, x), y, np.full_like(y, z)])
        return cls(pos, np.full(y.size, amplitude, dtype=complex))


def incident_field_spectral(
    sources: SourceSet,
    grid: Grid3D,
    omega: float,
    lattice: ModeLattice,
    c0: float = 1.0,
) -> SpectralField:
    """Spectrum of the incident field u0 = sum_m A_m G(|x - x_m|) on a grid.

    Samples the superposed point-source field slab by slab, then transforms.
    A source coinciding with a grid node would make u0 singular there and is
    rejected.
    """
    if lattice.nx != grid.nx:
        raise ValueError("mode lattice does not match the grid")
    for p in sources.positions:
        ix, iy, iz = grid.nearest_index(*p)
        if 0 <= ix < grid.nx and 0 <= iy < grid.ny and 0 <= iz < grid.nz:
            node = (
                grid.x_coords()[ix],
                grid.y_coords()[iy],
                grid.z_nodes[iz],
            )
            if np.allclose(p, node, rtol=0.0, atol=1e-13):
                raise ValueError(f"source at {tuple(p)} coincides with a grid node")

    x = grid.x_coords()
    y = grid.y_coords()
    slabs = np.zeros((grid.nz, grid.nx, grid.ny), dtype=complex)
    for p, a in zip(sources.positions, sources.amplitudes):
        dist2_xy = (x[:, None] - p[0]) ** 2 + (y[None, :] - p[1]) ** 2
        for iz, z in enumerate(grid.z_nodes):
            r = np.sqrt(dist2_xy + (z - p[2]) ** 2)
            slabs[iz] += a * (-np.exp(1j * (omega / c0) * r) / (4.0 * np.pi * r))
    spec = forward_slab(slabs, grid)
    return SpectralField(grid, spec.reshape(grid.nz, grid.nx * grid.ny).T)


@dataclass(frozen=True)
class Bump:
    """One clipped-paraboloid inhomogeneity: weight * (1 - q/radius^2)_+.

    q is the quadratic form |x - c|^2 plus optional cross terms
    cross_xy*dx*dy + cross_xz*dx*dz + cross_yz*dy*dz. q is used directly
    (never through a square root), so indefinite cross terms simply widen
    the bump where q goes negative; clipping happens at the (.)_+.
    """

    center: tuple[float, float, float]
    radius: float
    weight: float
    cross_xy: float = 0.0
    cross_xz: float = 0.0
    cross_yz: float = 0.0

    def quadratic_form(self, x, y, z):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        dz = np.asarray(z, dtype=float) - self.center[2]
        return (
            dx * dx
            + dy * dy
            + dz * dz
            + self.cross_xy * dx * dy
            + self.cross_xz * dx * dz
            + self.cross_yz * dy * dz
        )


@dataclass(frozen=True)
class Phantom:
    """Analytic nonnegative inhomogeneity coefficient xi(x, y, z)."""

    amplitude: float
    bumps: tuple[Bump, ...]

    @classmethod
    def three_bumps(cls, amplitude: float = 0.3) -> "Phantom":
        """The built-in model medium: three small local inhomogeneities."""
        return cls(
            amplitude=amplitude,
            bumps=(
                Bump(center=(1.0, 2.0, 0.5), radius=0.4, weight=1.0),
                Bump(center=(4.0, -3.0, 0.5), radius=0.25, weight=2.0, cross_yz=1.5),
                Bump(center=(-3.0, 0.0, 0.45), radius=0.3, weight=2.5, cross_yz=-1.5),
            ),
        )

    def __call__(self, x, y, z):
        """Evaluate xi at (broadcastable) coordinates."""
        total = np.zeros(np.broadcast(np.asarray(x), np.asarray(y), np.asarray(z)).shape)
        for b in self.bumps:
            q = b.quadratic_form(x, y, z)
            total += b.weight * np.maximum(1.0 - q / (b.radius * b.radius), 0.0)
        out = self.amplitude * total
        return out if out.ndim else float(out)

    def sample_on(self, grid: Grid3D) -> np.ndarray:
        """xi sampled on all grid nodes, shape (nx, ny, nz)."""
        xg, yg, zg = grid.meshgrid()
        return self(xg, yg, zg)

    def max_value(self, refine: int = 33) -> float:
        """Numeric maximum of xi: bump centers plus a local fine sampling.

        Exact at a center for isolated bumps; the sampling guards against
        overlapping supports.
        """
        best = 0.0
        for b in self.bumps:
            cx, cy, cz = b.center
            r = b.radius
            t = np.linspace(-r, r, refine)
            xg, yg, zg = np.meshgrid(cx + t, cy + t, cz + t, indexing="ij")
            best = max(best, float(np.max(self(xg, yg, zg))))
        return best


def contrast(phantom: Phantom, c0: float = 1.0) -> float:
    """Relative peak sound-speed deviation max{1/sqrt(1 - c0^2 xi)} - 1."""
    m = phantom.max_value()
    if c0 * c0 * m >= 1.0:
        raise ValueError(
            f"max xi = {m} reaches 1/c0^2; sound speed undefined for this amplitude"
        )
    return 1.0 / np.sqrt(1.0 - c0 * c0 * m) - 1.0


def xi_to_speed(xi: np.ndarray, c0: float = 1.0) -> np.ndarray:
    """Convert the inhomogeneity coefficient to sound speed c = (c0^-2 - xi)^-1/2."""
    xi = np.asarray(xi, dtype=float)
    radicand = c0 ** (-2) - xi
    if np.any(radicand <= 0.0):
        idx = tuple(int(i) for i in np.argwhere(radicand <= 0.0)[0])
        raise ValueError(f"nonpositive radicand at node {idx}: xi too large for c0")
    return 1.0 / np.sqrt(radicand)
