"""Scenario configuration (YAML or JSON files)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .oven import DISTURBED, NOMINAL, OvenParams

log = logging.getLogger(__name__)

CASES = {
    "A": {"y_d": [160.0, 150.0, 150.0, 160.0, 150.0, 150.0]},
    "B": {"y_d": [140.0] * 6},
    "C": {"y_d": [160.0, 150.0, 150.0, 160.0, 150.0, 150.0], "noise_levels": [1.0, 2.0, 3.0, 4.0, 5.0],
          "modes": ["disturbed"], "drift": True},
}

# Material parameter names accepted under ``params``.
PARAM_ALIASES = {
    "density": "density",
    "specific_heat": "specific_heat",
    "effective_emissivity": "emissivity",
    "emissivity": "emissivity",
    "absorptivity": "absorptivity",
    "heat_conduction": "conduction",
    "conduction": "conduction",
    "convection_factor": "convection",
    "convection": "convection",
}
GEOMETRY_KEYS = {"thickness", "zone_width", "zone_depth", "heater_distance", "heater_area",
                 "initial_temp", "cycle_time", "dt", "sensor_zones"}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    case: str = "A"
    y_d: list[float] = field(default_factory=lambda: list(CASES["A"]["y_d"]))
    modes: list[str] = field(default_factory=lambda: ["nominal", "disturbed"])
    noise_sd: float = 0.0
    noise_levels: list[float] | None = None
    design_noise_sd: float | None = None
    drift: bool = False
    cycles: int = 60
    crisp: bool = True
    ideal: bool = True
    noisy: int = 30
    repeats: int = 1
    u_min: float = 300.0
    u_max: float = 450.0
    n_sets: int = 3
    k_n: float = 0.25
    k_d: float = 1.0
    alpha: float = 0.2701
    crisp_u_first: float = 350.0
    consequents: list[float] = field(default_factory=lambda: [0.6, 0.25, 0.0, -0.5, -1.0])
    design_seed: int = 2011
    runtime_seed: int = 7
    window: tuple[int, int] = (10, 60)
    geometry: dict[str, Any] = field(default_factory=dict)
    params: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("noise_sd", "u_min", "u_max", "k_n", "k_d", "alpha", "crisp_u_first"):
            setattr(self, name, float(getattr(self, name)))
        self.y_d = [float(v) for v in self.y_d]
        self.consequents = [float(v) for v in self.consequents]
        if self.noise_levels is not None:
            self.noise_levels = [float(v) for v in self.noise_levels]
        if self.cycles < 1:
            raise ConfigError("cycles must be >= 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if len(self.y_d) != 6:
            raise ConfigError("y_d must have six entries")
        for mode in self.modes:
            if mode not in ("nominal", "disturbed"):
                raise ConfigError(f"unknown oven mode {mode!r}")
        if not 0 <= self.alpha < 1:
            raise ConfigError("alpha must satisfy 0 <= alpha < 1")
        if self.noisy < 0:
            raise ConfigError("noisy controller count must be >= 0")
        self.window = tuple(self.window)
        bad = set(self.geometry) - GEOMETRY_KEYS
        if bad:
            raise ConfigError(f"unknown geometry keys {sorted(bad)}")

    def oven_params(self, mode: str) -> OvenParams:
        base = NOMINAL if mode == "nominal" else DISTURBED
        overrides = dict(self.geometry)
        if "sensor_zones" in overrides:
            overrides["sensor_zones"] = tuple(overrides["sensor_zones"])
        for key, value in self.params.get(mode, {}).items():
            if key not in PARAM_ALIASES:
                raise ConfigError(f"unknown parameter {key!r}")
            overrides[PARAM_ALIASES[key]] = float(value)
        return base.with_overrides(**overrides) if overrides else base

    def design_sd(self) -> float:
        return self.noise_sd if self.design_noise_sd is None else self.design_noise_sd

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def from_mapping(doc: dict[str, Any]) -> ScenarioConfig:
    """Build a config from the nested file layout.

    Accepted keys: ``case``, ``y_d``, ``oven.mode`` / ``oven.modes``,
    ``oven.geometry.*``, ``params.<mode>.*`` (or flat ``params.*`` for every
    mode), ``noise_sd``, ``noise_levels``, ``drift``, ``cycles``,
    ``controllers.{crisp,ideal,noisy}``, ``filter.{k_n,k_d,alpha,consequents}``,
    ``model.{u_min,u_max,n_sets,repeats,design_noise_sd}``, ``crisp_u_first``,
    ``seeds.{design,runtime}``.
    """
    doc = dict(doc or {})
    kw: dict[str, Any] = {}
    case = str(doc.pop("case", "A")).upper()
    if case not in CASES:
        raise ConfigError(f"unknown case {case!r}")
    kw["case"] = case
    preset = CASES[case]
    kw["y_d"] = [float(v) for v in doc.pop("y_d", preset["y_d"])]
    if "noise_levels" in preset:
        kw["noise_levels"] = list(preset["noise_levels"])
    if "modes" in preset:
        kw["modes"] = list(preset["modes"])
    if "drift" in preset:
        kw["drift"] = preset["drift"]

    oven = doc.pop("oven", {}) or {}
    if "mode" in oven:
        kw["modes"] = [oven["mode"]] if isinstance(oven["mode"], str) else list(oven["mode"])
    if "modes" in oven:
        kw["modes"] = list(oven["modes"])
    kw["geometry"] = dict(oven.get("geometry", {}) or {})

    params = doc.pop("params", {}) or {}
    if params and not set(params) <= {"nominal", "disturbed"}:
        params = {"nominal": params, "disturbed": params}
    kw["params"] = params

    for key in ("noise_sd", "drift", "cycles", "crisp_u_first", "noise_levels"):
        if key in doc:
            kw[key] = doc.pop(key)
    controllers = doc.pop("controllers", {}) or {}
    for key in ("crisp", "ideal", "noisy"):
        if key in controllers:
            kw[key] = controllers[key]
    filt = doc.pop("filter", {}) or {}
    for key in ("k_n", "k_d", "alpha", "consequents"):
        if key in filt:
            kw[key] = filt[key]
    if "alpha" in doc:
        kw["alpha"] = doc.pop("alpha")
    model = doc.pop("model", {}) or {}
    for key in ("u_min", "u_max", "n_sets", "repeats", "design_noise_sd"):
        if key in model:
            kw[key] = model[key]
    seeds = doc.pop("seeds", {}) or {}
    if "design" in seeds:
        kw["design_seed"] = int(seeds["design"])
    if "runtime" in seeds:
        kw["runtime_seed"] = int(seeds["runtime"])
    if "window" in doc:
        kw["window"] = tuple(doc.pop("window"))
    doc.pop("outputs", None)
    if doc:
        raise ConfigError(f"unknown configuration keys {sorted(doc)}")
    return ScenarioConfig(**kw)


def load_config(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("configuration file must hold a mapping")
    return from_mapping(doc or {})
