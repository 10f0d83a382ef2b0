"""Batch pipeline stages: phantom dump, data synthesis, inversion, evaluation,
and timing benchmarks.

Every stage writes its artifacts plus a manifest (JSON, stable key order)
recording the config hash, wall times, diagnostics, and a checksummed file
inventory, so any reconstruction can be traced to the exact inputs that
produced it. Kernel tables are cached on disk keyed by grid geometry and
frequency; construction dominates setup cost and the tables are reusable
across noise levels and regularizer sweeps.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .fieldio import export_slices_csv, read_field, write_field
from .fields import ComplexField, Grid3D, make_grids
from .forward import add_noise, born_iterate, scattered_data
from .inverse import (
    InversionResult,
    ModeSolveStats,
    extract_xi_lsq,
    extract_xi_single,
    recompute_internal_field,
    solve_modes,
)
from .manifest import ManifestBuilder, read_manifest
from .medium import GreenKernelTable, build_green_kernel, incident_field_spectral
from .metrics import TimingRecord, localization_report, slice_relative_error, timing_fit
from .runconfig import ConfigError, RunConfig
from .spectral import ModeLattice, forward_xy, inverse_xy


def _kernel_cache_path(
    cache_dir: Path, src: Grid3D, recv: Grid3D, omega: float
) -> Path:
    key = f"{src.content_key()}|{recv.content_key()}|omega={omega:.12g}"
    digest = hashlib.sha256(key.encode()).hexdigest()[:24]
    return cache_dir / f"kernel_{digest}.npz"


def get_kernel(
    src: Grid3D,
    recv: Grid3D,
    omega: float,
    lattice: ModeLattice,
    cache_dir: Path | None = None,
) -> GreenKernelTable:
    """Build a kernel table, loading/saving a disk cache when enabled."""
    if cache_dir is not None:
        path = _kernel_cache_path(cache_dir, src, recv, omega)
        if path.exists():
            with np.load(path) as data:
                return GreenKernelTable(
                    omega=float(data["omega"]),
                    row_z=data["row_z"],
                    col_z=data["col_z"],
                    offsets=data["offsets"],
                    offset_index=data["offset_index"],
                    values=data["values"],
                )
    table = build_green_kernel(src, recv, omega, lattice)
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(
            tmp,
            omega=table.omega,
            row_z=table.row_z,
            col_z=table.col_z,
            offsets=table.offsets,
            offset_index=table.offset_index,
            values=table.values,
        )
        tmp.replace(path)
    return table


def _cache_dir(config: RunConfig) -> Path | None:
    if not config.output.kernel_cache:
        return None
    return Path(config.output.kernel_cache_dir)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def run_phantom(config: RunConfig, out_dir: str | Path) -> Path:
    """Dump the exact coefficient sampled on the scatterer grid."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid_x, _ = make_grids(config.grid)
    xi_field = ComplexField(grid_x, config.phantom.sample_on(grid_x).astype(complex))
    manifest = ManifestBuilder("phantom", config.config_hash())
    t0 = time.perf_counter()
    path = out / "xi_exact.laf"
    write_field(xi_field, path)
    export_slices_csv(xi_field, out / "slices", "xi_exact")
    manifest.add_time("sample_and_write", time.perf_counter() - t0)
    manifest.add_file(path, out)
    for p in sorted((out / "slices").glob("*.csv")):
        manifest.add_file(p, out)
    manifest.write(out / "manifest.json")
    return out


def run_synthesize(config: RunConfig, out_dir: str | Path) -> Path:
    """Forward-solve each frequency and write (optionally noisy) data dumps.

    One W dump per frequency; deterministic given config and seed. A Born
    divergence propagates with the offending frequency in its message.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid_x, grid_y = make_grids(config.grid)
    lattice = ModeLattice.for_grid(grid_x)
    xi = config.phantom.sample_on(grid_x)
    cache = _cache_dir(config)

    manifest = ManifestBuilder("synthesize", config.config_hash())
    manifest.set("grid_x", grid_x.content_key())
    manifest.set("grid_y", grid_y.content_key())
    manifest.set("noise", {"delta": config.delta, "seed": config.seed})
    iterations = {}
    data_files = []
    for i, omega in enumerate(config.frequencies):
        t0 = time.perf_counter()
        kernel_xx = get_kernel(grid_x, grid_x, omega, lattice, cache)
        kernel_xy = get_kernel(grid_x, grid_y, omega, lattice, cache)
        u0 = incident_field_spectral(config.sources, grid_x, omega, lattice)
        manifest.add_time(f"setup_{i:03d}", time.perf_counter() - t0)

        t0 = time.perf_counter()
        fwd = born_iterate(
            u0, kernel_xx, xi, omega,
            tol=config.forward.tol, max_iter=config.forward.max_iter,
        )
        _, w_field = scattered_data(
            kernel_xy, omega, grid_y, u_spec=fwd.u_spec, xi_samples=xi
        )
        w_out = add_noise(w_field, config.delta, config.seed + i)
        manifest.add_time(f"forward_{i:03d}", time.perf_counter() - t0)
        iterations[f"{omega:g}"] = fwd.iterations

        w_path = out / f"w_{i:03d}.laf"
        write_field(w_out, w_path)
        _write_csv(
            out / f"residuals_{i:03d}.csv",
            ["iteration", "update_norm"],
            [(n + 1, repr(float(r))) for n, r in enumerate(fwd.residual_history)],
        )
        data_files.append({"index": i, "omega": omega, "file": w_path.name})

    manifest.set("forward_iterations", iterations)
    manifest.set("data_files", data_files)
    for p in sorted(out.glob("w_*.laf")) + sorted(out.glob("residuals_*.csv")):
        manifest.add_file(p, out)
    manifest.write(out / "manifest.json")
    return out


@dataclass(frozen=True)
class FrequencyInversion:
    """Per-frequency reconstruction pieces kept for extraction and diagnostics."""

    omega: float
    v_field: ComplexField
    u_field: ComplexField
    stats: ModeSolveStats


def invert_frequency(
    w_field: ComplexField,
    config: RunConfig,
    omega: float,
    grid_x: Grid3D,
    lattice: ModeLattice,
    cache: Path | None,
) -> FrequencyInversion:
    """Algorithm core for one frequency: mode solves plus field recomputation."""
    kernel_xy = get_kernel(grid_x, w_field.grid, omega, lattice, cache)
    kernel_xx = get_kernel(grid_x, grid_x, omega, lattice, cache)
    u0 = incident_field_spectral(config.sources, grid_x, omega, lattice)
    w_spec = forward_xy(w_field)
    v_spec, stats = solve_modes(w_spec, kernel_xy, omega, config.regularizer, grid_x)
    u_spec = recompute_internal_field(v_spec, u0, kernel_xx, omega)
    return FrequencyInversion(
        omega=omega,
        v_field=inverse_xy(v_spec),
        u_field=inverse_xy(u_spec),
        stats=stats,
    )


def _write_xi_artifact(
    out: Path, name: str, xi: np.ndarray, grid: Grid3D
) -> Path:
    field = ComplexField(grid, xi.astype(complex))
    path = out / f"{name}.laf"
    write_field(field, path)
    export_slices_csv(field, out / f"slices_{name}", name)
    return path


def run_invert(
    config: RunConfig, data_dir: str | Path, out_dir: str | Path
) -> dict[str, InversionResult]:
    """Reconstruct the coefficient from a synthesize stage's artifacts.

    Consumes the data manifest plus W dumps, checks grid compatibility
    before any compute, and writes xi dumps (per frequency, plus the
    least-squares combination when configured), slice CSVs, diagnostics,
    and a manifest. Returns the inversion results keyed by artifact name.
    """
    data_dir = Path(data_dir)
    out = Path(out_dir)
    data_manifest = read_manifest(data_dir / "manifest.json")
    grid_x, grid_y = make_grids(config.grid)
    if data_manifest.get("grid_x") != grid_x.content_key() or data_manifest.get(
        "grid_y"
    ) != grid_y.content_key():
        raise ConfigError(
            "data artifacts were produced on different grids than this config"
        )
    entries = data_manifest["data_files"]
    omegas = [e["omega"] for e in entries]
    if sorted(omegas) != sorted(config.frequencies):
        raise ConfigError(
            f"data frequencies {omegas} do not match config {list(config.frequencies)}"
        )

    out.mkdir(parents=True, exist_ok=True)
    lattice = ModeLattice.for_grid(grid_x)
    cache = _cache_dir(config)
    manifest = ManifestBuilder("invert", config.config_hash())
    manifest.set("data_manifest_config_hash", data_manifest.get("config_hash"))
    manifest.set("grid_x", grid_x.content_key())

    inversions: list[FrequencyInversion] = []
    for entry in entries:
        w_field = read_field(data_dir / entry["file"])
        if w_field.grid.nx != grid_x.nx:
            raise ConfigError(
                f"data dump {entry['file']} has N={w_field.grid.nx}, "
                f"config expects N={grid_x.nx}"
            )
        t0 = time.perf_counter()
        inv = invert_frequency(
            w_field, config, entry["omega"], grid_x, lattice, cache
        )
        manifest.add_time(f"invert_{entry['index']:03d}", time.perf_counter() - t0)
        inversions.append(inv)

    diag_rows = []
    rank_stats = {}
    results: dict[str, InversionResult] = {}
    for i, inv in enumerate(inversions):
        ext = extract_xi_single(inv.v_field, inv.u_field, config.extraction.eps_div)
        name = f"xi_{i:03d}"
        results[name] = InversionResult(
            frequencies=(inv.omega,),
            v_fields=(inv.v_field,),
            u_fields=(inv.u_field,),
            xi=ext.xi,
            xi_imag_norm=ext.imag_norm,
            masked_fraction=ext.masked_fraction,
            mode_stats=(inv.stats,),
        )
        _write_xi_artifact(out, name, ext.xi, grid_x)
        _write_csv(
            out / f"rank_hist_{i:03d}.csv",
            ["rank", "modes"],
            sorted(inv.stats.rank_histogram().items()),
        )
        diag_rows.append(
            (
                name,
                repr(inv.omega),
                repr(ext.imag_norm),
                repr(ext.masked_fraction),
                inv.stats.failed_modes,
            )
        )
        rank_stats[f"{inv.omega:g}"] = {
            "min": int(inv.stats.ranks.min()),
            "median": float(np.median(inv.stats.ranks)),
            "max": int(inv.stats.ranks.max()),
            "failed": inv.stats.failed_modes,
        }

    if config.extraction.combine == "least_squares":
        ext = extract_xi_lsq(
            [inv.v_field for inv in inversions],
            [inv.u_field for inv in inversions],
            config.extraction.eps_div,
        )
        results["xi_combined"] = InversionResult(
            frequencies=tuple(inv.omega for inv in inversions),
            v_fields=tuple(inv.v_field for inv in inversions),
            u_fields=tuple(inv.u_field for inv in inversions),
            xi=ext.xi,
            xi_imag_norm=ext.imag_norm,
            masked_fraction=ext.masked_fraction,
            mode_stats=tuple(inv.stats for inv in inversions),
        )
        _write_xi_artifact(out, "xi_combined", ext.xi, grid_x)
        diag_rows.append(
            ("xi_combined", "all", repr(ext.imag_norm), repr(ext.masked_fraction), 0)
        )

    _write_csv(
        out / "diagnostics.csv",
        ["artifact", "omega", "imag_norm", "masked_fraction", "failed_modes"],
        diag_rows,
    )
    manifest.set("rank_stats", rank_stats)
    manifest.set(
        "artifacts",
        [
            {"name": name, "file": f"{name}.laf"}
            for name in results
        ],
    )
    for p in sorted(out.glob("xi_*.laf")) + sorted(out.glob("*.csv")):
        manifest.add_file(p, out)
    for d in sorted(out.glob("slices_*")):
        for p in sorted(d.glob("*.csv")):
            manifest.add_file(p, out)
    manifest.write(out / "manifest.json")
    return results


def run_evaluate(config: RunConfig, recon_dir: str | Path, out_dir: str | Path) -> Path:
    """Accuracy curves and localization tables for every xi artifact."""
    recon_dir = Path(recon_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recon_manifest = read_manifest(recon_dir / "manifest.json")
    grid_x, _ = make_grids(config.grid)
    xi_exact = config.phantom.sample_on(grid_x)

    manifest = ManifestBuilder("evaluate", config.config_hash())
    summary = {}
    for entry in recon_manifest["artifacts"]:
        name = entry["name"]
        xi_field = read_field(recon_dir / entry["file"])
        if xi_field.grid.shape != grid_x.shape:
            raise ConfigError(f"artifact {name} grid does not match config")
        xi = xi_field.values.real
        curve = slice_relative_error(xi, xi_exact, grid_x, {"artifact": name})
        _write_csv(
            out / f"accuracy_{name}.csv",
            ["z", "delta_l2"],
            [(repr(float(z)), repr(float(d))) for z, d in zip(curve.z, curve.delta)],
        )
        locs = localization_report(xi, config.phantom, grid_x)
        _write_csv(
            out / f"localization_{name}.csv",
            ["true_x", "true_y", "true_z", "found_x", "found_y", "found_z", "offset", "peak"],
            [
                tuple(map(repr, L.true_center + L.found_center + (L.offset, L.peak_value)))
                for L in locs
            ],
        )
        summary[name] = {
            "mean_delta_l2": curve.mean,
            "max_offset": max(L.offset for L in locs),
        }
    manifest.set("summary", summary)
    for p in sorted(out.glob("*.csv")):
        manifest.add_file(p, out)
    manifest.write(out / "manifest.json")
    return out


def invert_wall_seconds(config: RunConfig, w_fields: list[ComplexField]) -> float:
    """Wall time of the inverse-stage compute (mode solves, recomputation,
    extraction) at the config's grids; kernel construction and I/O excluded
    since tables are cacheable across runs."""
    grid_x, _ = make_grids(config.grid)
    lattice = ModeLattice.for_grid(grid_x)
    cache = _cache_dir(config)
    kernels = {}
    u0s = {}
    specs = {}
    for omega, w_field in zip(config.frequencies, w_fields):
        kernels[omega] = (
            get_kernel(grid_x, w_field.grid, omega, lattice, cache),
            get_kernel(grid_x, grid_x, omega, lattice, cache),
        )
        u0s[omega] = incident_field_spectral(config.sources, grid_x, omega, lattice)
        specs[omega] = forward_xy(w_field)

    t0 = time.perf_counter()
    vs, us = [], []
    for omega in config.frequencies:
        kernel_xy, kernel_xx = kernels[omega]
        v_spec, _ = solve_modes(
            specs[omega], kernel_xy, omega, config.regularizer, grid_x
        )
        u_spec = recompute_internal_field(v_spec, u0s[omega], kernel_xx, omega)
        vs.append(inverse_xy(v_spec))
        us.append(inverse_xy(u_spec))
    if len(vs) == 1:
        extract_xi_single(vs[0], us[0], config.extraction.eps_div)
    else:
        extract_xi_lsq(vs, us, config.extraction.eps_div)
    return time.perf_counter() - t0


def run_bench(config: RunConfig, n_values: list[int] | None, out_dir: str | Path) -> Path:
    """Time the inverse solve over a sweep of transverse sizes N.

    Writes the timing table and the fitted power law t = t0 * N^p.
    """
    n_list = list(n_values) if n_values is not None else list(config.bench_n)
    if not n_list:
        raise ConfigError("bench needs a nonempty list of N values")
    for n in n_list:
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigError(f"bench N values must be powers of two, got {n}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = ManifestBuilder("bench", config.config_hash())
    records = []
    for n in n_list:
        cfg_n = replace(config, grid=replace(config.grid, n_transverse=n))
        grid_x, grid_y = make_grids(cfg_n.grid)
        lattice = ModeLattice.for_grid(grid_x)
        xi = cfg_n.phantom.sample_on(grid_x)
        cache = _cache_dir(cfg_n)
        w_fields = []
        for omega in cfg_n.frequencies:
            kernel_xx = get_kernel(grid_x, grid_x, omega, lattice, cache)
            kernel_xy = get_kernel(grid_x, grid_y, omega, lattice, cache)
            u0 = incident_field_spectral(cfg_n.sources, grid_x, omega, lattice)
            fwd = born_iterate(
                u0, kernel_xx, xi, omega,
                tol=cfg_n.forward.tol, max_iter=cfg_n.forward.max_iter,
            )
            _, w_field = scattered_data(
                kernel_xy, omega, grid_y, u_spec=fwd.u_spec, xi_samples=xi
            )
            w_fields.append(add_noise(w_field, cfg_n.delta, cfg_n.seed))
        seconds = invert_wall_seconds(cfg_n, w_fields)
        records.append(
            TimingRecord(
                n=n, m=cfg_n.grid.scatterer_nz, m1=cfg_n.grid.receiver_nz,
                seconds=seconds,
            )
        )

    _write_csv(
        out / "timing.csv",
        ["n", "m", "m1", "seconds"],
        [(r.n, r.m, r.m1, repr(r.seconds)) for r in records],
    )
    result = {}
    if len(records) >= 2:
        t0_fit, p = timing_fit(records)
        result = {"t0": t0_fit, "exponent": p}
        manifest.set("fit", result)
    manifest.add_file(out / "timing.csv", out)
    manifest.write(out / "manifest.json")
    return out
