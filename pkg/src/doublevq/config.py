"""Declarative run description shared by every CLI subcommand.

A config file is YAML (JSON is valid YAML too)::

    format_version: 1
    input:
      file: data/santa_fe_a.csv        # or:
      # generate: {kind: mackey_glass, n: 5200, seed: 7, params: {}}
    lag: {d: 1, offsets: [0, 1, 2, 3, 5, 6]}
    split: {counts: [4000, 1000, 100], unit: 1}   # or {fractions: [0.6, 0.2, 0.2]}
    normalize: false
    som: {epochs: 50, radius_start: null, radius_end: 0.0, init: sample}
    n1: 20
    n2: 20
    grid: {n1: "10:60:10", n2: "10:60:10", horizon: 100, paths: 100}
    horizon: 100
    paths: 1000
    levels: [0.025, 0.975]
    seed: 0
    jobs: 1
    out_dir: out
    stability: {scales: [2, 5, 10, 50], horizon: 500, paths: 200, steps: 100000,
                margin: 0.5}

Command-line flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Optional

import yaml

from .selection import SweepGrid, parse_range
from .series import LagSpec, parse_offsets
from .som import SomConfig

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    input_file: Optional[str] = None
    generate: Optional[dict] = None
    d: int = 1
    offsets: tuple = (0,)
    split_counts: Optional[tuple] = None
    split_fractions: Optional[tuple] = None
    split_unit: int = 1
    normalize: bool = False
    epochs: int = 50
    radius_start: Optional[float] = None
    radius_end: float = 0.0
    init: str = "sample"
    n1: int = 10
    n2: int = 10
    grid_n1: tuple = (1,)
    grid_n2: tuple = (1,)
    grid_horizon: Optional[int] = None
    grid_paths: int = 100
    horizon: int = 100
    paths: int = 1000
    levels: tuple = (0.025, 0.975)
    seed: int = 0
    jobs: int = 1
    out_dir: str = "out"
    scales: tuple = (2.0, 5.0, 10.0, 50.0)
    stab_horizon: int = 500
    stab_paths: int = 200
    stab_steps: int = 100_000
    margin: float = 0.5

    def validate(self) -> "RunConfig":
        try:
            self.lag_spec()
            self.som_template(1)
            self.sweep_grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.input_file and self.generate:
            raise ConfigError("give either input.file or input.generate, not both")
        if self.split_counts and self.split_fractions:
            raise ConfigError("give either split.counts or split.fractions, not both")
        for name in ("n1", "n2", "horizon", "paths", "jobs", "stab_horizon", "stab_paths",
                     "stab_steps", "split_unit"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        lo, hi = self.levels
        if not 0 < lo <= hi < 1:
            raise ConfigError(f"levels must satisfy 0 < lower <= upper < 1, got {self.levels}")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        return self

    def lag_spec(self) -> LagSpec:
        return LagSpec(self.d, tuple(self.offsets))

    def som_template(self, k: int) -> SomConfig:
        return SomConfig(k=k, epochs=self.epochs, radius_start=self.radius_start,
                         radius_end=self.radius_end, init=self.init, seed=self.seed)

    def sweep_grid(self) -> SweepGrid:
        return SweepGrid(self.grid_n1, self.grid_n2, self.grid_horizon, self.grid_paths)


_FLAT_KEYS = {f.name for f in fields(RunConfig)}


def _tuple(value, conv=float):
    if isinstance(value, str):
        return tuple(conv(v) for v in value.split(",") if v.strip())
    return tuple(conv(v) for v in value)


def _axis(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(parse_range(str(value)))


def from_document(doc: dict) -> RunConfig:
    """Flatten a nested config document into a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    doc = dict(doc)
    version = doc.pop("format_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config format_version {version!r}")
    flat = {}
    try:
        inp = doc.pop("input", None) or {}
        if "file" in inp:
            flat["input_file"] = str(inp["file"])
        if "generate" in inp:
            flat["generate"] = dict(inp["generate"])
        lag = doc.pop("lag", None)
        if lag is not None:
            flat["d"] = int(lag.get("d", 1))
            offsets = lag.get("offsets", [0])
            flat["offsets"] = (parse_offsets(offsets) if isinstance(offsets, str)
                               else tuple(int(o) for o in offsets))
        split = doc.pop("split", None)
        if split is not None:
            if "counts" in split:
                flat["split_counts"] = _tuple(split["counts"], int)
            if "fractions" in split:
                flat["split_fractions"] = _tuple(split["fractions"], float)
            flat["split_unit"] = int(split.get("unit", 1))
        som_doc = doc.pop("som", None)
        if som_doc is not None:
            for key in ("epochs", "radius_start", "radius_end", "init"):
                if key in som_doc:
                    flat[key] = som_doc[key]
        grid = doc.pop("grid", None)
        if grid is not None:
            if "n1" in grid:
                flat["grid_n1"] = _axis(grid["n1"])
            if "n2" in grid:
                flat["grid_n2"] = _axis(grid["n2"])
            if "horizon" in grid:
                flat["grid_horizon"] = None if grid["horizon"] is None else int(grid["horizon"])
            if "paths" in grid:
                flat["grid_paths"] = int(grid["paths"])
        stab = doc.pop("stability", None)
        if stab is not None:
            mapping = {"scales": "scales", "horizon": "stab_horizon", "paths": "stab_paths",
                       "steps": "stab_steps", "margin": "margin"}
            for key, target in mapping.items():
                if key in stab:
                    flat[target] = _tuple(stab[key]) if key == "scales" else stab[key]
        if "levels" in doc:
            flat["levels"] = _tuple(doc.pop("levels"))
        for key in list(doc):
            if key not in _FLAT_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            flat[key] = doc.pop(key)
    except (TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc
    return RunConfig(**flat)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return from_document(doc)


def override(cfg: RunConfig, **values) -> RunConfig:
    """Apply non-None flag values on top of ``cfg``."""
    changes = {k: v for k, v in values.items() if v is not None}
    unknown = set(changes) - _FLAT_KEYS
    if unknown:
        raise ConfigError(f"unknown settings {sorted(unknown)}")
    return replace(cfg, **changes)


__all__ = ["CONFIG_VERSION", "ConfigError", "RunConfig", "from_document", "load_config",
           "override"]
