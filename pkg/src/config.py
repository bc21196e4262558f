"""Settings layering for lab runs.

Precedence, highest first: command-line flags, a ``--config`` file of
``key = value`` lines, the environment (``NHLAB_SEED``, ``.env``), built-in
defaults. The merged values are validated into a ``ScenarioConfig``.
"""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from src.errors import ConfigError, LabError
from src.harness import Scenario, ScenarioConfig

load_dotenv()

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "NHLAB_SEED"

# Keys accepted in config files, spelled as the long flag names with "_".
CONFIG_KEYS = frozenset({
    "trials", "backend", "param", "seed", "p", "weight", "ttl", "workers",
    "weights", "p_values", "k_values", "out",
})
OUTPUT_KEY = "out"


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Parse a ``key = value`` file; unknown or empty keys raise ConfigError."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values: Dict[str, str] = {}
    for raw_key, raw_value in dotenv_values(path).items():
        key = normalize_key(raw_key)
        if key not in CONFIG_KEYS:
            raise ConfigError(f"Unknown config key '{raw_key}' in {path}")
        if raw_value is None or not raw_value.strip():
            raise ConfigError(f"Config key '{raw_key}' in {path} has no value")
        values[key] = raw_value.strip()
    logger.debug("Loaded %d settings from %s", len(values), path)
    return values


def environment_values(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    environ = os.environ if environ is None else environ
    seed = environ.get(SEED_ENV_VAR, "").strip()
    return {"seed": seed} if seed else {}


def merge_settings(*layers: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge layers given lowest precedence first; None values never override."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    return merged


def _to_scenario_config(scenario: Union[Scenario, str], values: Mapping[str, Any]) -> ScenarioConfig:
    fields = {k: v for k, v in values.items() if k != OUTPUT_KEY}
    return ScenarioConfig(scenario=Scenario(scenario), **fields)


def validate_config_values(
    scenario: Union[Scenario, str], values: Mapping[str, Any]
) -> Tuple[bool, Optional[str]]:
    """Check merged settings without raising.

    Returns:
        (is_valid, error_message) where error_message is None if valid
    """
    unknown = sorted(set(values) - CONFIG_KEYS - {"deterministic_dbl"})
    if unknown:
        return False, f"Unknown settings: {', '.join(unknown)}"
    try:
        _to_scenario_config(scenario, values)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
        )
        return False, problems
    except (LabError, ValueError) as exc:
        return False, str(exc)
    return True, None


def build_scenario_config(
    scenario: Union[Scenario, str],
    cli_values: Optional[Mapping[str, Any]] = None,
    config_path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> Tuple[ScenarioConfig, Optional[str]]:
    """Resolve every layer into a validated ScenarioConfig plus the output path (if any).

    Raises:
        ConfigError: a layer is malformed or the merged settings do not validate
    """
    file_values = read_config_file(config_path) if config_path else {}
    merged = merge_settings(environment_values(environ), file_values, cli_values or {})
    is_valid, error = validate_config_values(scenario, merged)
    if not is_valid:
        raise ConfigError(error)
    config = _to_scenario_config(scenario, merged)
    if "seed" not in merged:
        logger.info("No seed given; drew %s", config.seed)
    return config, merged.get(OUTPUT_KEY)
