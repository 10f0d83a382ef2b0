"""Experiment configuration: YAML parsing, validation, and stable hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .fields import GridConfig, make_grids
from .medium import Bump, Phantom, SourceSet
from .regularizers import RegularizerConfig


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class ForwardOptions:
    tol: float = 1e-13
    max_iter: int = 1000


@dataclass(frozen=True)
class ExtractionOptions:
    combine: str = "per_frequency"  # "per_frequency" | "least_squares"
    eps_div: float = 1e-3


@dataclass(frozen=True)
class OutputOptions:
    kernel_cache: bool = True
    kernel_cache_dir: str = "kernel-cache"


@dataclass(frozen=True)
class RunConfig:
    """Everything a batch run needs, parsed from one YAML file."""

    grid: GridConfig
    frequencies: tuple[float, ...]
    sources: SourceSet
    phantom: Phantom
    delta: float = 0.0
    seed: int = 1234
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    extraction: ExtractionOptions = field(default_factory=ExtractionOptions)
    forward: ForwardOptions = field(default_factory=ForwardOptions)
    output: OutputOptions = field(default_factory=OutputOptions)
    bench_n: tuple[int, ...] = (32, 64, 128)

    def __post_init__(self):
        if len(self.frequencies) == 0:
            raise ConfigError("frequency list must be nonempty")
        if any(w <= 0 for w in self.frequencies):
            raise ConfigError("frequencies must be positive")
        if self.delta < 0:
            raise ConfigError("noise level delta must be nonnegative")
        if self.extraction.combine not in ("per_frequency", "least_squares"):
            raise ConfigError(f"unknown extraction combine {self.extraction.combine!r}")
        try:
            make_grids(self.grid)
        except ValueError as exc:
            raise ConfigError(f"invalid grids: {exc}") from exc

    def canonical_dict(self) -> dict:
        """Plain dict of everything that affects computed results."""
        g = self.grid
        return {
            "grid": {
                "x_bounds": list(g.x_bounds),
                "y_bounds": list(g.y_bounds),
                "n_transverse": g.n_transverse,
                "scatterer_z": list(g.scatterer_z),
                "scatterer_nz": g.scatterer_nz,
                "receiver_z": list(g.receiver_z),
                "receiver_nz": g.receiver_nz,
            },
            "frequencies": list(self.frequencies),
            "sources": [
                {"position": list(map(float, p)), "amplitude": [a.real, a.imag]}
                for p, a in zip(self.sources.positions, self.sources.amplitudes)
            ],
            "phantom": {
                "amplitude": self.phantom.amplitude,
                "bumps": [
                    {
                        "center": list(b.center),
                        "radius": b.radius,
                        "weight": b.weight,
                        "cross_xy": b.cross_xy,
                        "cross_xz": b.cross_xz,
                        "cross_yz": b.cross_yz,
                    }
                    for b in self.phantom.bumps
                ],
            },
            "noise": {"delta": self.delta, "seed": self.seed},
            "regularizer": {
                "method": self.regularizer.method,
                "tsvd_rel_threshold": self.regularizer.tsvd_rel_threshold,
                "tikhonov_alpha": self.regularizer.tikhonov_alpha,
                "selection_policy": self.regularizer.selection_policy,
                "noise_delta": self.regularizer.noise_delta,
            },
            "extraction": {
                "combine": self.extraction.combine,
                "eps_div": self.extraction.eps_div,
            },
            "forward": {"tol": self.forward.tol, "max_iter": self.forward.max_iter},
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def _parse_sources(raw: dict | list) -> SourceSet:
    if isinstance(raw, dict) and "line_y" in raw:
        spec = raw["line_y"]
        return SourceSet.line_y(
            y_values=np.asarray(spec["y_values"], dtype=float),
            x=float(spec.get("x", 0.0)),
            z=float(spec.get("z", 6.0)),
            amplitude=_parse_amplitude(spec.get("amplitude", 1.0)),
        )
    if isinstance(raw, dict) and "points" in raw:
        raw = raw["points"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("sources must be a nonempty points list or a line_y spec")
    positions = [entry["position"] for entry in raw]
    amplitudes = [_parse_amplitude(entry.get("amplitude", 1.0)) for entry in raw]
    return SourceSet(np.asarray(positions, dtype=float), np.asarray(amplitudes))


def _parse_amplitude(raw) -> complex:
    if isinstance(raw, (list, tuple)):
        if len(raw) != 2:
            raise ConfigError("complex amplitude must be a [re, im] pair")
        return complex(raw[0], raw[1])
    return complex(float(raw), 0.0)


def _parse_phantom(raw: dict) -> Phantom:
    bumps = []
    for entry in raw.get("bumps", []):
        bumps.append(
            Bump(
                center=tuple(float(v) for v in entry["center"]),
                radius=float(entry["radius"]),
                weight=float(entry["weight"]),
                cross_xy=float(entry.get("cross_xy", 0.0)),
                cross_xz=float(entry.get("cross_xz", 0.0)),
                cross_yz=float(entry.get("cross_yz", 0.0)),
            )
        )
    return Phantom(amplitude=float(raw.get("amplitude", 0.3)), bumps=tuple(bumps))


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from parsed YAML data."""
    try:
        g = data["grid"]
        grid = GridConfig(
            x_bounds=tuple(float(v) for v in g.get("x_bounds", (-10.0, 10.0))),
            y_bounds=tuple(float(v) for v in g.get("y_bounds", (-10.0, 10.0))),
            n_transverse=int(g["n_transverse"]),
            scatterer_z=tuple(float(v) for v in g["scatterer_z"]),
            scatterer_nz=int(g["scatterer_nz"]),
            receiver_z=tuple(float(v) for v in g["receiver_z"]),
            receiver_nz=int(g["receiver_nz"]),
        )
        noise = data.get("noise", {})
        reg_raw = data.get("regularizer", {})
        reg = RegularizerConfig(
            method=reg_raw.get("method", "tsvd"),
            tsvd_rel_threshold=float(reg_raw.get("tsvd_rel_threshold", 1e-7)),
            tikhonov_alpha=float(reg_raw.get("tikhonov_alpha", 1e-8)),
            selection_policy=reg_raw.get("selection_policy", "fixed"),
            noise_delta=(
                float(reg_raw["noise_delta"]) if "noise_delta" in reg_raw else None
            ),
        )
        ext_raw = data.get("extraction", {})
        fwd_raw = data.get("forward", {})
        out_raw = data.get("output", {})
        return RunConfig(
            grid=grid,
            frequencies=tuple(float(w) for w in data["frequencies"]),
            sources=_parse_sources(data["sources"]),
            phantom=_parse_phantom(data["phantom"]),
            delta=float(noise.get("delta", 0.0)),
            seed=int(noise.get("seed", 1234)),
            regularizer=reg,
            extraction=ExtractionOptions(
                combine=ext_raw.get("combine", "per_frequency"),
                eps_div=float(ext_raw.get("eps_div", 1e-3)),
            ),
            forward=ForwardOptions(
                tol=float(fwd_raw.get("tol", 1e-13)),
                max_iter=int(fwd_raw.get("max_iter", 1000)),
            ),
            output=OutputOptions(
                kernel_cache=bool(out_raw.get("kernel_cache", True)),
                kernel_cache_dir=str(out_raw.get("kernel_cache_dir", "kernel-cache")),
            ),
            bench_n=tuple(int(n) for n in data.get("bench", {}).get("n_values", (32, 64, 128))),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Parse a YAML config file into a validated RunConfig."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)
