"""Config file loading and run configuration for thzchan."""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .raytracer import RoomGeometry, geometry_preset
from .scenario import ScenarioKind, ScenarioParams, SystemParams, preset, system_preset


logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "THZCHAN_CONFIG"
OUTPUT_FORMATS = ("csv", "json", "ndjson")


class Settings(BaseModel):
    """Overrides read from the YAML config file, one section per concern."""

    model_config = ConfigDict(extra="forbid")

    scenario: dict[ScenarioKind, dict[str, Any]] = Field(default_factory=dict)
    system: dict[str, Any] = Field(default_factory=dict)
    system_by_scenario: dict[ScenarioKind, dict[str, Any]] = Field(default_factory=dict)
    geometry: dict[ScenarioKind, dict[str, Any]] = Field(default_factory=dict)
    run: dict[str, Any] = Field(default_factory=dict)


def load_settings(path: str | Path | None = None) -> Settings:
    """Read settings from path, falling back to $THZCHAN_CONFIG, then to presets only."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return Settings()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    logger.info("Loaded config from %s", path)
    return Settings.model_validate(data)


def _override(model: BaseModel, *updates: dict[str, Any]) -> Any:
    merged = model.model_dump()
    for update in updates:
        merged.update(update)
    return type(model).model_validate(merged)


def scenario_params(kind: ScenarioKind | str, settings: Settings | None = None) -> ScenarioParams:
    kind = ScenarioKind(kind)
    settings = settings or Settings()
    return _override(preset(kind), settings.scenario.get(kind, {}))


def system_params(kind: ScenarioKind | str, settings: Settings | None = None) -> SystemParams:
    kind = ScenarioKind(kind)
    settings = settings or Settings()
    return _override(system_preset(kind), settings.system, settings.system_by_scenario.get(kind, {}))


def room_geometry(kind: ScenarioKind | str, settings: Settings | None = None) -> RoomGeometry:
    kind = ScenarioKind(kind)
    settings = settings or Settings()
    return _override(geometry_preset(kind), settings.geometry.get(kind, {}))


class RunConfig(BaseModel):
    """One CLI run: what to simulate, how many drops, where the output goes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: ScenarioKind = ScenarioKind.MEETING_ROOM
    geometry: dict[str, Any] | None = None
    n_drops: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    distances_m: tuple[float, ...] = ()
    deterministic: bool | None = None
    calibrated: bool = False
    sounding: bool = False
    free_space: bool = False
    out_dir: Path = Path("out")
    formats: tuple[Literal["csv", "json", "ndjson"], ...] = OUTPUT_FORMATS
    jobs: int = Field(default=1, ge=1)
    check: bool = False
    tolerance: float = Field(default=0.07, gt=0)

    @field_validator("distances_m")
    @classmethod
    def _positive_distances(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(d <= 0 for d in value):
            raise ValueError("distances must be positive")
        return value

    def config_hash(self, *models: BaseModel) -> str:
        """SHA-256 over everything that affects the outputs (not out_dir or jobs)."""
        payload = {
            "run": self.model_dump(mode="json", exclude={"out_dir", "jobs"}),
            "models": [m.model_dump(mode="json") for m in models],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def run_config(settings: Settings | None = None, **overrides: Any) -> RunConfig:
    """RunConfig from the config file's run section with CLI overrides on top."""
    settings = settings or Settings()
    values = dict(settings.run)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.model_validate(values)


def resolve_geometry(cfg: RunConfig, settings: Settings | None = None) -> RoomGeometry:
    geom = room_geometry(cfg.scenario, settings)
    if cfg.geometry:
        geom = _override(geom, cfg.geometry)
    return geom


def resolve_params(
    cfg: RunConfig,
    settings: Settings | None = None,
    calibrated: dict[str, Any] | None = None,
) -> ScenarioParams:
    """Scenario parameters for a run: preset, config overrides, stored calibration, CLI toggles."""
    params = scenario_params(cfg.scenario, settings)
    if calibrated is not None:
        params = ScenarioParams.model_validate(calibrated)
    if cfg.deterministic is not None:
        params = _override(params, {"deterministic": cfg.deterministic})
    return params
