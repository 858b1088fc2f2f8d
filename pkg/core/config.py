"""
Pipeline configuration.
Loads the JSON config file and merges command-line overrides on top.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ConfigError
from .evaluation import EvalConfig
from .gi import GiConfig
from .hmm_ops import PredictConfig
from .ingest import IngestConfig

_log = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "pipeline_config.json"

_SECTIONS = {
    'ingest': IngestConfig,
    'gi': GiConfig,
    'predict': PredictConfig,
    'eval': EvalConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    gi: GiConfig = field(default_factory=GiConfig)
    predict: PredictConfig = field(default_factory=PredictConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: Dict[str, str] = field(default_factory=dict)
    seed: int = 0

    def with_overrides(self, section: str, **values: Any) -> "PipelineConfig":
        """Return a copy with the non-None values replaced in one section."""
        values = {key: value for key, value in values.items() if value is not None}
        if not values:
            return self
        try:
            updated = replace(getattr(self, section), **values)
        except TypeError as e:
            raise ConfigError(f"[{section}] {e}")
        return replace(self, **{section: updated})

    def to_dict(self) -> Dict[str, Any]:
        data = {name: asdict(getattr(self, name)) for name in _SECTIONS}
        allow = data['ingest'].get('user_allow_list')
        if allow is not None:
            data['ingest']['user_allow_list'] = sorted(allow)
        data['paths'] = dict(self.paths)
        data['seed'] = self.seed
        return data


def _build_section(name: str, values: Any):
    cls = _SECTIONS[name]
    if not isinstance(values, dict):
        raise ConfigError(f"section '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"section '{name}': unknown keys {unknown}")
    if name == 'ingest' and values.get('user_allow_list') is not None:
        values = dict(values, user_allow_list=frozenset(str(u) for u in values['user_allow_list']))
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"section '{name}': {e}")


def config_from_dict(data: Dict[str, Any]) -> PipelineConfig:
    unknown = sorted(set(data) - set(_SECTIONS) - {'paths', 'seed', 'description'})
    if unknown:
        raise ConfigError(f"unknown configuration sections {unknown}")
    sections = {name: _build_section(name, data[name]) for name in _SECTIONS if name in data}
    paths = data.get('paths', {})
    if not isinstance(paths, dict):
        raise ConfigError("'paths' must be an object")
    seed = data.get('seed', 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return PipelineConfig(paths={str(k): str(v) for k, v in paths.items()}, seed=seed, **sections)


def load_config(config_file: Optional[str] = None) -> PipelineConfig:
    """
    Load configuration from a JSON file.

    A missing default file gives the built-in defaults; a missing file named
    explicitly is an error.
    """
    path = Path(config_file or DEFAULT_CONFIG_FILE)
    if not path.exists():
        if config_file is not None:
            raise ConfigError(f"config file not found: {path}")
        _log.debug("No %s found, using defaults", path)
        return PipelineConfig()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except ValueError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)


def save_config(config: PipelineConfig, config_file: str = DEFAULT_CONFIG_FILE) -> None:
    with open(config_file, 'w', encoding='utf-8') as f:
        json.dump(config.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')
