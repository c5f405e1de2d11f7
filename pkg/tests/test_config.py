"""Unit tests for thzchan.config module."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from thzchan.config import (
    CONFIG_ENV_VAR,
    RunConfig,
    Settings,
    load_settings,
    resolve_geometry,
    resolve_params,
    room_geometry,
    run_config,
    scenario_params,
    system_params,
)
from thzchan.scenario import ScenarioKind, preset


@pytest.fixture
def config_file(temp_dir):
    path = temp_dir / "thzchan.yaml"
    path.write_text(
        "scenario:\n"
        "  hallway:\n"
        "    lambda_n: 4.0\n"
        "system:\n"
        "  rx_hpbw_deg: 12.0\n"
        "system_by_scenario:\n"
        "  nlos:\n"
        "    noise_floor_dbm: -117.0\n"
        "geometry:\n"
        "  meeting_room:\n"
        "    max_reflection_order: 1\n"
        "run:\n"
        "  n_drops: 20\n"
        "  seed: 5\n"
    )
    return path


class TestLoadSettings:
    """Tests for load_settings function."""

    def test_no_path_gives_presets(self, monkeypatch):
        """load_settings should return empty settings without a path or env var."""
        monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
        assert load_settings() == Settings()

    def test_reads_yaml(self, config_file):
        """load_settings should read every section of the YAML file."""
        settings = load_settings(config_file)
        assert settings.scenario[ScenarioKind.HALLWAY] == {"lambda_n": 4.0}
        assert settings.system == {"rx_hpbw_deg": 12.0}
        assert settings.run == {"n_drops": 20, "seed": 5}

    def test_env_var(self, config_file, monkeypatch):
        """load_settings should fall back to the THZCHAN_CONFIG variable."""
        monkeypatch.setenv(CONFIG_ENV_VAR, str(config_file))
        assert load_settings().run["n_drops"] == 20

    def test_empty_file(self, temp_dir):
        """load_settings should treat an empty file as no overrides."""
        path = temp_dir / "empty.yaml"
        path.write_text("")
        assert load_settings(path) == Settings()

    def test_missing_file(self, temp_dir):
        """load_settings should raise FileNotFoundError for a missing file."""
        with pytest.raises(FileNotFoundError, match="Config file not found"):
            load_settings(temp_dir / "missing.yaml")

    def test_rejects_list(self, temp_dir):
        """load_settings should reject a top level that is not a mapping."""
        path = temp_dir / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="mapping"):
            load_settings(path)

    def test_rejects_unknown_section(self, temp_dir):
        """load_settings should reject unknown sections."""
        path = temp_dir / "bad.yaml"
        path.write_text("plots:\n  dpi: 300\n")
        with pytest.raises(ValidationError):
            load_settings(path)


class TestOverrides:
    """Tests for scenario_params, system_params and room_geometry."""

    def test_scenario_override(self, config_file):
        """scenario_params should apply the scenario section over the preset."""
        params = scenario_params("hallway", load_settings(config_file))
        assert params.lambda_n == 4.0
        assert params.r_tau == preset(ScenarioKind.HALLWAY).r_tau

    def test_other_scenario_untouched(self, config_file):
        """scenario_params should leave scenarios without overrides at their preset."""
        assert scenario_params("nlos", load_settings(config_file)) == preset(ScenarioKind.NLOS)

    def test_system_layers(self, config_file):
        """system_params should layer the common and per-scenario sections."""
        settings = load_settings(config_file)
        nlos = system_params("nlos", settings)
        assert nlos.rx_hpbw_deg == 12.0
        assert nlos.noise_floor_dbm == -117.0
        assert system_params("meeting_room", settings).noise_floor_dbm == -160.0

    def test_geometry_override(self, config_file):
        """room_geometry should apply the geometry section."""
        assert room_geometry("meeting_room", load_settings(config_file)).max_reflection_order == 1

    def test_invalid_override(self):
        """scenario_params should reject an override that breaks validation."""
        settings = Settings(scenario={ScenarioKind.NLOS: {"lambda_n": -1.0}})
        with pytest.raises(ValidationError):
            scenario_params("nlos", settings)


class TestRunConfig:
    """Tests for RunConfig and run_config."""

    def test_defaults(self):
        """RunConfig should default to 1000 meeting-room drops with seed 0."""
        cfg = RunConfig()
        assert cfg.scenario is ScenarioKind.MEETING_ROOM
        assert cfg.n_drops == 1000
        assert cfg.seed == 0
        assert cfg.out_dir == Path("out")
        assert cfg.formats == ("csv", "json", "ndjson")

    def test_cli_overrides_file(self, config_file):
        """run_config should let explicit values win over the run section."""
        cfg = run_config(load_settings(config_file), n_drops=7, seed=None)
        assert cfg.n_drops == 7
        assert cfg.seed == 5

    def test_rejects_bad_distances(self):
        """RunConfig should reject non-positive distances."""
        with pytest.raises(ValidationError):
            RunConfig(distances_m=(1.0, 0.0))

    def test_rejects_zero_drops(self):
        """RunConfig should require at least one drop."""
        with pytest.raises(ValidationError):
            RunConfig(n_drops=0)

    def test_rejects_unknown_format(self):
        """RunConfig should reject unknown output formats."""
        with pytest.raises(ValidationError):
            RunConfig(formats=("xlsx",))

    def test_hash_ignores_output_location(self):
        """config_hash should not depend on out_dir or jobs."""
        a = RunConfig(out_dir=Path("a"), jobs=1)
        b = RunConfig(out_dir=Path("b"), jobs=4)
        assert a.config_hash() == b.config_hash()

    def test_hash_tracks_inputs(self):
        """config_hash should change with the seed and with the models."""
        base = RunConfig()
        assert base.config_hash() != RunConfig(seed=1).config_hash()
        assert base.config_hash(preset("hallway")) != base.config_hash(preset("nlos"))


class TestResolve:
    """Tests for resolve_geometry and resolve_params."""

    def test_geometry_from_run(self):
        """resolve_geometry should apply the run's geometry overrides last."""
        cfg = RunConfig(scenario="hallway", geometry={"max_reflection_order": 0})
        assert resolve_geometry(cfg).max_reflection_order == 0

    def test_deterministic_toggle(self):
        """resolve_params should apply the deterministic toggle."""
        cfg = RunConfig(scenario="hallway", deterministic=False)
        assert resolve_params(cfg).deterministic is False

    def test_calibrated_params(self):
        """resolve_params should use stored calibrated parameters when given."""
        calibrated = preset("nlos").model_copy(update={"lambda_n": 3.3}).model_dump(mode="json")
        cfg = RunConfig(scenario="nlos")
        assert resolve_params(cfg, calibrated=calibrated).lambda_n == 3.3
