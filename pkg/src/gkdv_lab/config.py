"""Experiment configuration: sectioned key=value files with strict validation.

The file format is INI-style ([section] headers, key = value lines).
Unknown sections or keys fail fast before any computation starts; CLI
``--set section.key=value`` overrides take precedence over file values.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

EXPERIMENTS = ("spectrum", "identities", "linear-flows", "stability", "scatter", "inverse", "norms")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class GridConfig:
    n: int = 1024
    length: float = 80.0


@dataclass
class SolverConfig:
    dt: float = 1e-3
    T: float = 1.0
    sponge: bool = False
    snapshot_stride: int = 10


@dataclass
class ModulationConfig:
    kappa: float = 10.0
    newton_tol: float = 1e-12


@dataclass
class NormsConfig:
    dyadic_base: float = 2.0
    epsilon: float = 0.1
    besov_s: float = -1.0 / 6.0
    besov_p: float = 2.0
    besov_q: float = float("inf")


@dataclass
class ExperimentConfig:
    experiment: str = "identities"
    seed: int = 0
    output_dir: str = "runs/out"
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    norms: NormsConfig = field(default_factory=NormsConfig)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.grid.n < 8 or (self.grid.n & (self.grid.n - 1)) != 0:
            raise ConfigError(f"grid.n must be a power of two >= 8, got {self.grid.n}")
        if self.grid.length <= 0:
            raise ConfigError("grid.length must be positive")
        if self.solver.dt <= 0 or self.solver.T <= 0:
            raise ConfigError("solver.dt and solver.T must be positive")
        if self.solver.snapshot_stride < 1:
            raise ConfigError("solver.snapshot_stride must be at least 1")
        if self.modulation.kappa < 1.0:
            raise ConfigError("modulation.kappa must be at least 1")
        if not (0.0 < self.norms.epsilon <= 1.0):
            raise ConfigError("norms.epsilon must lie in (0, 1]")
        if self.norms.dyadic_base <= 1.0:
            raise ConfigError("norms.dyadic_base must exceed 1")

    def to_dict(self) -> dict:
        return asdict(self)


_SECTION_TYPES = {
    "grid": GridConfig,
    "solver": SolverConfig,
    "modulation": ModulationConfig,
    "norms": NormsConfig,
}
_TOP_LEVEL = {"experiment": str, "seed": int, "output_dir": str}


def _coerce(raw: str, target_type) -> object:
    if target_type is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if target_type is float:
        return float(raw)
    if target_type is int:
        return int(raw)
    return raw


def _section_fields(cls) -> dict[str, type]:
    return {f.name: f.type if isinstance(f.type, type) else _annotation_type(f) for f in fields(cls)}


def _annotation_type(f) -> type:
    # dataclass fields annotated via `from __future__ import annotations`
    # arrive as strings; map the few used here
    mapping = {"int": int, "float": float, "bool": bool, "str": str}
    return mapping.get(str(f.type), str)


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse a config file and apply ``section.key=value`` overrides."""
    values: dict[str, dict[str, object]] = {name: {} for name in _SECTION_TYPES}
    top: dict[str, object] = {}

    if path is not None:
        parser = configparser.ConfigParser()
        text = Path(path).read_text()
        # allow top-level keys before any section header
        parser.read_string("[__top__]\n" + text)
        for section in parser.sections():
            if section == "__top__":
                for key, raw in parser.items(section):
                    if key not in _TOP_LEVEL:
                        raise ConfigError(f"unknown top-level key {key!r}")
                    top[key] = _coerce(raw, _TOP_LEVEL[key])
                continue
            if section not in _SECTION_TYPES:
                raise ConfigError(f"unknown section [{section}]")
            allowed = _section_fields(_SECTION_TYPES[section])
            for key, raw in parser.items(section):
                if key.lower() == "t":
                    key = "T"
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                values[section][key] = _coerce(raw, allowed[key])

    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, raw = item.split("=", 1)
        if "." in lhs:
            section, key = lhs.split(".", 1)
            if section not in _SECTION_TYPES:
                raise ConfigError(f"unknown section {section!r} in override")
            if key.lower() == "t":
                key = "T"
            allowed = _section_fields(_SECTION_TYPES[section])
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section {section!r}")
            values[section][key] = _coerce(raw, allowed[key])
        else:
            if lhs not in _TOP_LEVEL:
                raise ConfigError(f"unknown top-level key {lhs!r}")
            top[lhs] = _coerce(raw, _TOP_LEVEL[lhs])

    try:
        return ExperimentConfig(
            **top,
            grid=GridConfig(**values["grid"]),
            solver=SolverConfig(**values["solver"]),
            modulation=ModulationConfig(**values["modulation"]),
            norms=NormsConfig(**values["norms"]),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    """Rebuild a config from the dictionary stored in meta.json."""
    data = dict(data)
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        sections[name] = cls(**data.pop(name, {}))
    return ExperimentConfig(**data, **sections)


def dump_config_json(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, default=float)
