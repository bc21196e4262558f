import sys
import os
# Ensure project root is on sys.path for tests
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from pathlib import Path

import pytest

from src.config import (
    SEED_ENV_VAR,
    build_scenario_config,
    environment_values,
    merge_settings,
    normalize_key,
    read_config_file,
    validate_config_values,
)
from src.errors import ConfigError
from src.harness import Scenario
from src.reconcile import Backend

ROOT_DIR = Path(__file__).parent.parent
ENV_SEED = "ab" * 32
CLI_SEED = "cd" * 32


def _write(tmp_path, text):
    path = tmp_path / "lab.conf"
    path.write_text(text)
    return path


def test_normalize_key():
    assert normalize_key(" P-Values ") == "p_values"


def test_read_config_file(tmp_path):
    path = _write(tmp_path, "# comment\ntrials = 50\nbackend = d4\np-values = 5,7\n")
    assert read_config_file(path) == {"trials": "50", "backend": "d4", "p_values": "5,7"}


def test_read_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        read_config_file(tmp_path / "missing.conf")
    with pytest.raises(ConfigError, match="Unknown config key"):
        read_config_file(_write(tmp_path, "rounds = 3\n"))
    with pytest.raises(ConfigError, match="has no value"):
        read_config_file(_write(tmp_path, "trials =\n"))


def test_environment_values():
    assert environment_values({SEED_ENV_VAR: ENV_SEED}) == {"seed": ENV_SEED}
    assert environment_values({SEED_ENV_VAR: "  "}) == {}
    assert environment_values({}) == {}


def test_merge_settings_precedence():
    merged = merge_settings({"seed": "env", "trials": 1}, {"trials": 2, "p": None}, {"trials": 3, "p": None})
    assert merged == {"seed": "env", "trials": 3}


def test_validate_config_values():
    assert validate_config_values("honest", {"trials": "10"}) == (True, None)
    is_valid, error = validate_config_values("honest", {"rounds": 3})
    assert not is_valid and "rounds" in error
    is_valid, error = validate_config_values("honest", {"trials": "0"})
    assert not is_valid and error.startswith("trials:")


def test_cli_overrides_file_overrides_environment(tmp_path):
    path = _write(tmp_path, f"trials = 50\nseed = {'ef' * 32}\nparam = toy-n64-q257\n")
    config, out = build_scenario_config(
        Scenario.BACKDOOR,
        cli_values={"trials": 7, "backend": "d4"},
        config_path=path,
        environ={SEED_ENV_VAR: ENV_SEED},
    )
    assert config.trials == 7
    assert config.seed == "ef" * 32
    assert config.backend is Backend.D4
    assert config.param == "toy-n64-q257"
    assert out is None


def test_environment_seed_is_used(tmp_path):
    config, _ = build_scenario_config("honest", {"out": "results/x.json"}, environ={SEED_ENV_VAR: ENV_SEED})
    assert config.seed == ENV_SEED
    config, out = build_scenario_config(
        "honest", {"seed": CLI_SEED, "out": "results/x.json"}, environ={SEED_ENV_VAR: ENV_SEED})
    assert config.seed == CLI_SEED
    assert out == "results/x.json"


def test_missing_seed_is_drawn():
    config, _ = build_scenario_config("honest", {}, environ={})
    assert len(config.seed) == 64


def test_invalid_settings_raise_config_error():
    with pytest.raises(ConfigError, match="backend"):
        build_scenario_config("honest", {"backend": "lattice"}, environ={})
    with pytest.raises(ConfigError):
        build_scenario_config("honest", {"param": "toy-n2-q17", "backend": "d4"}, environ={})


@pytest.mark.parametrize("name, scenario", [("default.conf", "sweep"), ("toy.conf", "sweep"), ("toy.conf", "cached_a")])
def test_shipped_configs_are_valid(name, scenario):
    config, _ = build_scenario_config(scenario, {}, ROOT_DIR / "configs" / name, environ={})
    assert config.trials >= 1
