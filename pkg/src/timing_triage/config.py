"""JSON configuration: bundled defaults deep-merged with an optional user file."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Any, Optional

_SECRET_KEYS = {"api_key", "apikey", "token", "secret", "password", "authorization"}


class ConfigError(ValueError):
    pass


def data_path(*parts: str) -> Path:
    """Filesystem path of a bundled data file."""
    return Path(str(resources.files("timing_triage").joinpath("data", *parts)))


def default_config() -> dict[str, Any]:
    return json.loads(data_path("default_config.json").read_text(encoding="utf-8"))


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _reject_secrets(node: Any, where: str = "") -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            if str(key).lower() in _SECRET_KEYS:
                raise ConfigError(
                    f"config key {where + str(key)!r} looks like a secret; "
                    "pass credentials via the TIMING_TRIAGE_API_KEY environment variable"
                )
            _reject_secrets(value, f"{where}{key}.")


def load_config(path: Optional[str | Path] = None) -> dict[str, Any]:
    cfg = default_config()
    if path is None:
        return cfg
    try:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _reject_secrets(user)
    # user rule lists replace the defaults wholesale
    return deep_merge(cfg, user)
