import json
import re
from pathlib import Path

import pytest
import yaml

from junctionfab.errors import ConfigError
from junctionfab.features.config_manager import (
    PRESETS, RunConfig, get_preset, load_run_config, save_run_config,
)
from junctionfab.settings import JunctionFabSettings


def test_read_settings_from_yaml(tmp_path):
    """Test that JunctionFabSettings can be loaded from a YAML file."""
    path = tmp_path / "settings.yaml"
    path.write_text(yaml.dump({
        'threads': 4,
        'log_level': 'DEBUG',
        'log_to_console': False,
        'log_to_file': False,
    }))

    settings = JunctionFabSettings.from_yaml(path)

    assert settings.threads == 4
    assert settings.log_level == 'DEBUG'
    assert settings.log_to_console is False
    assert settings.log_to_file is False
    assert settings.settings_file == path


def test_read_partial_settings_from_yaml(tmp_path):
    """Test that missing values fall back to defaults."""
    path = tmp_path / "settings.yaml"
    path.write_text(yaml.dump({'log_level': 'WARNING'}))

    settings = JunctionFabSettings.from_yaml(path)

    assert settings.log_level == 'WARNING'
    assert settings.threads == 1
    assert settings.log_to_file is True


def test_read_empty_settings_file(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text('')

    settings = JunctionFabSettings.from_yaml(path)

    assert settings.threads == 1
    assert settings.log_level == 'INFO'


def test_read_nonexistent_settings_file():
    """A missing settings file is not an error: defaults apply."""
    settings = JunctionFabSettings.from_yaml('/nonexistent/path/settings.yaml')

    assert settings.threads == 1
    assert settings.log_level == 'INFO'


def test_env_vars_override_yaml(tmp_path, monkeypatch):
    """Test that environment variables override YAML values."""
    path = tmp_path / "settings.yaml"
    path.write_text(yaml.dump({'threads': 2, 'log_level': 'DEBUG'}))

    monkeypatch.setenv('JF_THREADS', '8')
    monkeypatch.setenv('JF_LOG_LEVEL', 'ERROR')

    settings = JunctionFabSettings.from_yaml(path)

    assert settings.threads == 8
    assert settings.log_level == 'ERROR'


def test_unknown_setting_rejected(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text(yaml.dump({'engine_addr': 'ipc:///tmp/x.ipc'}))

    with pytest.raises(ConfigError, match="engine_addr"):
        JunctionFabSettings.from_yaml(path)


def test_invalid_thread_count_rejected(monkeypatch):
    monkeypatch.setenv('JF_THREADS', '0')

    with pytest.raises(ConfigError):
        JunctionFabSettings.from_yaml(None)


def test_run_config_from_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "name: tilted\n"
        "seed: 7\n"
        "evaporation:\n"
        "  first:\n"
        "    angle: 40\n"
        "writer:\n"
        "  field_size: 500\n"
        "  scan_direction: Along\n"
    )

    config = load_run_config(path)

    assert config.name == "tilted"
    assert config.seed == 7
    assert config.evaporation.first.angle == 40.0
    assert config.writer.field_size == 500.0
    assert config.writer.scan_direction.value == "Along"
    # untouched sections keep their defaults
    assert config.stack.copolymer_thickness == 500.0


def test_run_config_from_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"name": "json-run", "seed": 3}))

    config = load_run_config(path)

    assert config.name == "json-run"
    assert config.seed == 3


def test_run_config_error_names_key_and_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(
        "name: bad\n"
        "stack:\n"
        "  copolymer_thickness: -5\n"
    )

    with pytest.raises(ConfigError) as exc:
        load_run_config(path)

    message = str(exc.value)
    assert f"{path}:3" in message
    assert "stack.copolymer_thickness" in message


def test_run_config_unknown_key(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("name: bad\nbogus: 1\n")

    with pytest.raises(ConfigError, match="bogus"):
        load_run_config(path)


def test_run_config_yaml_syntax_error(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("name: [unclosed\n")

    with pytest.raises(ConfigError, match=re.escape(str(path))):
        load_run_config(path)


def test_run_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_run_config(tmp_path / "nope.yaml")


def test_saved_config_reloads_with_same_hash(tmp_path):
    config = get_preset("overlay-full", seed=5)
    path = save_run_config(config, tmp_path / "config.yaml")

    reloaded = load_run_config(path)

    assert reloaded.config_hash() == config.config_hash()
    assert len(reloaded.wafer.sites) == len(config.wafer.sites)


def test_config_hash_tracks_content():
    assert RunConfig().config_hash() == RunConfig().config_hash()
    assert RunConfig(seed=1).config_hash() != RunConfig(seed=2).config_hash()


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build(name):
    config = get_preset(name, seed=11)

    assert config.seed == 11
    assert config.wafer.sites


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        get_preset("nope")


def test_shipped_example_config_matches_preset():
    path = Path(__file__).parent.parent / "config" / "reference.yaml"

    config = load_run_config(path)

    assert config.config_hash() == get_preset("reference").config_hash()
