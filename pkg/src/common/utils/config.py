"""
Load configuration from `config.toml`, an optional user TOML file and flag overrides.

Precedence: defaults < user file < overrides.
"""

from pathlib import Path
from typing import Any

from src.common.models.settings import RunConfig

THIS_DIR = Path(__file__).parent.resolve()

CONFIG_FILE_PATH = THIS_DIR / "config.toml"

SEEDED_SECTIONS = ("simulate", "poi", "model")


def _read_toml(path: Path) -> dict[str, Any]:
    import tomli

    with open(path, "rb") as f:
        data = tomli.load(f)
    return {k.lower(): v for k, v in data.items()}


def _deep_merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)  # pyright: ignore[reportUnknownArgumentType]
        else:
            merged[key] = value
    return merged


def _expand_dotted(overrides: dict[str, Any]) -> dict[str, Any]:
    """{"model.epochs": 3} -> {"model": {"epochs": 3}}"""
    nested: dict[str, Any] = {}
    for dotted, value in overrides.items():
        node = nested
        *parents, leaf = dotted.lower().split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return nested


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Build a validated RunConfig.

    Args:
        path: optional user TOML file; its tables override the packaged defaults.
        overrides: dotted-key values (e.g. ``{"model.epochs": 5, "seed": 7}``) applied last.

    Returns:
        RunConfig: the merged configuration.
    """
    data = _read_toml(CONFIG_FILE_PATH)
    explicit: dict[str, Any] = {}
    if path is not None:
        explicit = _read_toml(Path(path))
    if overrides:
        explicit = _deep_merge(explicit, _expand_dotted(overrides))
    data = _deep_merge(data, explicit)

    # the top-level seed feeds every seeded section that does not pin its own
    for section in SEEDED_SECTIONS:
        if "seed" not in explicit.get(section, {}):
            data.setdefault(section, {})["seed"] = data["seed"]
    if "w_max" not in explicit.get("model", {}):
        data.setdefault("model", {})["w_max"] = data.get("preprocess", {}).get("w_max", 32)

    return RunConfig(**data)


config = load_config()


def set_config(new_config: RunConfig) -> None:
    global config
    config = new_config


def get_config() -> RunConfig:
    return config


__all__ = ["config", "get_config", "load_config", "set_config"]  # allow users to set a new config if needed
