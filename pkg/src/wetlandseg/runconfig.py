"""The JSON run configuration shared by every CLI command.

Every field has a default except pixel_size (ground resolution is never
guessed) and the optional paths.  Unknown keys are rejected so a typo
cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from wetlandseg.errors import ConfigError
from wetlandseg.synthmap import DEFAULT_PALETTE


@dataclass
class SynthSection:
    rows: int = 1024
    cols: int = 1024
    wetland_fraction: float = 0.2
    clutter_density: float = 1.0
    palette: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_PALETTE.items()})


@dataclass
class PathsSection:
    map: str | None = None
    labels: str | None = None
    out: str | None = None


@dataclass
class RunConfig:
    pixel_size: float
    seed: int = 42
    epochs: int = 150
    batch_size: int = 128
    learning_rate: float = 1e-4
    dropout_rate: float = 0.3
    validation_fraction: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    channel_scale: int = 1
    leaky_slope: float = 0.01
    core_size: int = 80
    overlap_margin: int = 0
    fold_split_axis: str = "horizontal"
    threshold: float = 0.5
    min_area_m2: float = 1000.0
    jobs: int = 1
    crs_label: str = "local"
    synth: SynthSection = field(default_factory=SynthSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def to_dict(self) -> dict:
        return asdict(self)


def _build_section(cls, data: dict, where: str):
    known = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    data = dict(data)
    synth = data.pop("synth", {})
    paths = data.pop("paths", {})
    if "pixel_size" not in data:
        raise ConfigError("run config must set pixel_size (ground resolution in m/pixel)")
    known = set(RunConfig.__dataclass_fields__) - {"synth", "paths"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(
            synth=_build_section(SynthSection, synth, "synth"),
            paths=_build_section(PathsSection, paths, "paths"),
            **data,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON (line {exc.lineno})") from exc
    return config_from_dict(data)


def echo_config(out_dir, config: RunConfig) -> None:
    """Write the fully resolved configuration next to a command's outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
    (out_dir / "effective-config.json").write_text(text)
