"""Experiment configuration: parsing, validation, and manifests.

Config files are plain-text ``key=value`` lines (``#`` comments allowed).
Values on the command line (--seed and friends) override the file.  Every
command writes a ``manifest.txt`` echoing the fully resolved configuration,
so any artifact can be traced back to the exact settings and seeds that
produced it.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unknown keys, malformed values, or inconsistent settings."""


ARCHITECTURES = ("intra", "inter", "post")
HPI_METHODS = ("exact", "mc")

# desk-scale sweep defaults: minutes of runtime, denser or coarser grids
# remain reachable through the config
DEFAULT_ALPHA_GRID = (0.0, 0.25, 0.5, 0.75, 0.9, 1.0)
DEFAULT_BETA_GRID = (3, 6, 9, 12, 15)
DEFAULT_EPS_GRID = (0.5, 0.7, 0.8, 0.9, 0.97, 0.99, 1.0)
DEFAULT_RHO_GRID = (4, 6, 8, 10)


@dataclass
class ExperimentConfig:
    # signal model
    amplitude: float = 0.875
    freq: float = math.pi / 10          # cycles/sample; x_n = A cos(2*pi*F*n + phi)
    sigma: float = 0.04                 # sigma/step = 0.16 at the 3-bit default
    bits: int = 3
    n_window: int = 10

    # design pipeline
    heuristic: str = "H3"
    mask_method: str = "greedy"         # greedy | brute
    beta: int | None = None             # defaults to bN/2 when unset
    epsilon: float = 1.0
    draws: int | None = None            # Monte-Carlo index draws (Upsilon)
    hpi_method: str = "exact"
    rho: int = 8
    alpha: float = 1.0
    architecture: str = "post"
    tables: int = 1                     # Xi, inter-table multiplexing factor
    mask: str | None = None             # explicit mask string, skips the search
    lut: str | None = None              # LUT file consumed by evaluate/export-hex

    # run parameters
    samples: int = 100_000
    seed: int = 0
    trials: int = 1
    threads: int = 1
    quad_nodes: int = 512
    f_offset: float = 1e-3
    out_dir: str = "out"

    # sweep grids
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    beta_grid: tuple = DEFAULT_BETA_GRID
    eps_grid: tuple = DEFAULT_EPS_GRID
    rho_grid: tuple = DEFAULT_RHO_GRID

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.bits < 1 or self.bits > 16:
            raise ConfigError(f"bits must be in 1..16, got {self.bits}")
        if self.n_window < 1:
            raise ConfigError(f"n_window must be >= 1, got {self.n_window}")
        if self.beta is not None and not 0 <= self.beta <= self.bits * self.n_window:
            raise ConfigError(
                f"beta must be in 0..{self.bits * self.n_window}, got {self.beta}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(
                f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.hpi_method not in HPI_METHODS:
            raise ConfigError(
                f"hpi_method must be one of {HPI_METHODS}, got {self.hpi_method!r}")
        if self.hpi_method == "mc" and (self.draws is None or self.draws < 1):
            raise ConfigError("hpi_method=mc requires draws >= 1")
        if self.heuristic not in ("H0", "H1", "H2", "H3"):
            raise ConfigError(f"unknown heuristic {self.heuristic!r}")
        if self.mask_method not in ("greedy", "brute"):
            raise ConfigError(f"mask_method must be greedy or brute, got {self.mask_method!r}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.rho < 1:
            raise ConfigError(f"rho must be >= 1, got {self.rho}")
        if self.architecture == "post" and self.rho < self.bits:
            raise ConfigError(f"post tables need rho >= bits ({self.rho} < {self.bits})")
        if self.tables < 1:
            raise ConfigError(f"tables must be >= 1, got {self.tables}")
        if self.architecture == "intra" and self.tables != 1:
            raise ConfigError("intra architecture is single-table (tables=1)")
        if self.samples < self.n_window:
            raise ConfigError(
                f"samples must be >= n_window ({self.samples} < {self.n_window})")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.quad_nodes < 8:
            raise ConfigError(f"quad_nodes must be >= 8, got {self.quad_nodes}")
        if self.f_offset < 0:
            raise ConfigError(f"f_offset must be >= 0, got {self.f_offset}")
        if self.mask is not None:
            bn = self.bits * self.n_window
            if len(self.mask) != bn or set(self.mask) - {"0", "1"}:
                raise ConfigError(
                    f"mask must be a {bn}-character 0/1 string, got {self.mask!r}")
        if not 0 < self.freq < 0.5:
            raise ConfigError(f"freq must be in (0, 0.5) cycles/sample, got {self.freq}")
        for name in ("alpha_grid", "beta_grid", "eps_grid", "rho_grid"):
            grid = getattr(self, name)
            if len(grid) == 0:
                raise ConfigError(f"{name} must not be empty")

    def beta_value(self) -> int:
        """Mask size: the configured beta, or the bN/2 default."""
        if self.beta is not None:
            return self.beta
        return (self.bits * self.n_window) // 2


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}

# keys whose value is a comma-separated list
_GRID_KEYS = {
    "alpha_grid": float,
    "beta_grid": int,
    "eps_grid": float,
    "rho_grid": int,
}
_OPTIONAL_INT = {"draws", "beta"}
_OPTIONAL_STR = {"mask", "lut"}


def _coerce(key: str, raw: str):
    """Convert a raw config string to the field's declared type."""
    raw = raw.strip()
    if key in _GRID_KEYS:
        elem = _GRID_KEYS[key]
        try:
            return tuple(elem(part.strip()) for part in raw.split(",") if part.strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as a {elem.__name__} list")
    if key in _OPTIONAL_STR:
        return None if raw.lower() == "none" else raw
    if key in _OPTIONAL_INT:
        if raw.lower() == "none":
            return None
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as an integer")
    ftype = _FIELDS[key].type
    if ftype == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as an integer")
    if ftype == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as a number")
    return raw


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key=value`` lines on top of `base` (or the defaults)."""
    values = dataclasses.asdict(base) if base is not None else {}
    cfg = ExperimentConfig(**values) if values else ExperimentConfig()
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        updates[key] = _coerce(key, raw)
    return dataclasses.replace(cfg, **updates)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), base)


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Non-None keyword overrides (the CLI flags) replace config values."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    for key in updates:
        if key not in _FIELDS:
            raise ConfigError(f"unknown override {key!r}")
    return dataclasses.replace(cfg, **updates) if updates else cfg


def manifest_lines(cfg: ExperimentConfig, command: str, **extra) -> list[str]:
    """Full resolved configuration as sorted key=value lines.

    Everything that can affect an artifact goes through here; the manifest
    diff test relies on that.
    """
    entries = {"command": command}
    for f in dataclasses.fields(cfg):
        if f.name == "out_dir":
            continue  # affects artifact location, never content
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        entries[f.name] = value
    entries.update(extra)
    return [f"{k}={entries[k]}" for k in sorted(entries)]


def write_manifest(cfg: ExperimentConfig, command: str, out_dir, **extra) -> Path:
    path = Path(out_dir) / "manifest.txt"
    path.write_text("\n".join(manifest_lines(cfg, command, **extra)) + "\n")
    return path
