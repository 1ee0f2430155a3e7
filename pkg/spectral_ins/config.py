import dataclasses
import functools
import json
import logging
import os
from typing import Any, Dict, Optional

import yaml
from pykwalify.core import Core

from spectral_ins import asset_helpers
from spectral_ins import config_utils
from spectral_ins import constants
from spectral_ins import errors
from spectral_ins import spectral

logger = logging.getLogger(__name__)

SECTIONS = ["grid", "besov", "bony", "physics", "elliptic", "stokes", "lagrange", "ns"]


@functools.lru_cache(maxsize=32)
def get_defaults_text():
    logger.info(f"getting {constants.DEFAULTS_FILE}")
    return asset_helpers.read_from_site_packages(constants.DEFAULTS_FILE)


def get_defaults():
    return yaml.safe_load(get_defaults_text())


@functools.lru_cache()
def get_schema_path():
    logger.info("getting schema path")
    return asset_helpers.resolve_from_site_packages(constants.SCHEMA_FILE)


@functools.lru_cache()
def get_schema_extensions_path():
    logger.info("getting schema extensions path")
    return asset_helpers.resolve_from_site_packages(constants.SCHEMA_EXTENSIONS_FILE)


@functools.lru_cache()
def get_experiment_names():
    logger.info("getting experiment names")
    return [
        name.replace(".properties", "")
        for name in asset_helpers.list_from_site_packages(constants.EXPERIMENTS_DIRECTORY)
        if name.endswith(".properties")
    ]


@functools.lru_cache(maxsize=32)
def get_experiment_text(mode):
    logger.info(f"getting experiment text for {mode}")
    if mode not in get_experiment_names():
        raise errors.ConfigError(f"no example config for mode {mode}", field="mode")
    return asset_helpers.read_from_site_packages(
        os.path.sep.join([constants.EXPERIMENTS_DIRECTORY, f"{mode}.properties"])
    )


def _field_of(entry):
    parts = [p for p in str(getattr(entry, "path", "") or "").split("/") if p]
    parts = [p for p in parts if not p.isdigit()]
    key = getattr(entry, "key", None)
    if key is not None:
        parts.append(str(key))
    return ".".join(parts) or None


def _line_of(field, lines):
    while field:
        if field in lines:
            return lines[field]
        field = field.rpartition(".")[0]
    return None


def validate(resolved, lines=None):
    lines = lines or {}
    c = Core(
        source_data=resolved,
        schema_files=[get_schema_path()],
        extensions=[get_schema_extensions_path()],
    )
    try:
        c.validate(raise_exception=False)
    except AssertionError as e:
        field, _, message = str(e).partition(": ")
        raise errors.ConfigError(message, field=field, line=_line_of(field, lines))
    if c.validation_errors_exceptions:
        entry = c.validation_errors_exceptions[0]
        field = _field_of(entry)
        raise errors.ConfigError(
            "; ".join(c.validation_errors), field=field, line=_line_of(field, lines)
        )
    return resolved


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    seed: int
    output_dir: str
    grid: Dict[str, Any]
    besov: Dict[str, Any]
    bony: Dict[str, Any]
    physics: Dict[str, Any]
    elliptic: Dict[str, Any]
    stokes: Dict[str, Any]
    lagrange: Dict[str, Any]
    ns: Dict[str, Any]
    source: Optional[str] = None
    lines: Dict[str, int] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_dict(cls, resolved, source=None, lines=None):
        return cls(
            mode=resolved["mode"],
            seed=int(resolved["seed"]),
            output_dir=str(resolved["output_dir"]),
            source=source,
            lines=dict(lines or {}),
            **{section: dict(resolved.get(section, {})) for section in SECTIONS},
        )

    def to_dict(self):
        result = {"mode": self.mode, "seed": self.seed, "output_dir": self.output_dir}
        for section in SECTIONS:
            result[section] = json.loads(json.dumps(getattr(self, section)))
        return result

    def to_json(self):
        return json.dumps(self.to_dict(), indent=4, sort_keys=True)

    def build_grid(self):
        return spectral.Grid(
            int(self.grid["n"]), int(self.grid["N"]), float(self.grid["L"])
        )

    def to_key_value(self):
        return config_utils.render_key_value(self.to_dict())

    def keys(self):
        return sorted(config_utils.flatten(self.to_dict()))

    def with_value(self, key, value):
        """A validated copy with one dotted key replaced."""
        flat = config_utils.flatten(self.to_dict())
        if key not in flat:
            raise errors.ConfigError("not a recognized config key", field=key)
        flat[key] = value
        resolved = validate(config_utils.expand(flat), self.lines)
        return ExperimentConfig.from_dict(resolved, source=self.source, lines=self.lines)


def resolve(nested, mode=None, seed=None, output_dir=None, lines=None):
    overrides = {}
    if mode is not None:
        overrides["mode"] = mode
    if seed is not None:
        overrides["seed"] = seed
    if output_dir is not None:
        overrides["output_dir"] = output_dir
    resolved = config_utils.merge(config_utils.merge(get_defaults(), nested), overrides)
    return validate(resolved, lines)


def load_text(text, path=None, mode=None, seed=None, output_dir=None):
    text, nested, lines = config_utils.parse_text(text, path)
    resolved = resolve(nested, mode, seed, output_dir, lines)
    logger.info(f"resolved config for mode {resolved['mode']} seed {resolved['seed']}")
    return ExperimentConfig.from_dict(resolved, source=text, lines=lines)


def load_config(path, mode=None, seed=None, output_dir=None):
    if not os.path.exists(path):
        raise errors.ConfigError(f"config file {path} does not exist")
    logger.info(f"reading {path}")
    with open(path, "r") as f:
        text = f.read()
    return load_text(text, path, mode, seed, output_dir)


def load_defaults(mode=None, seed=None, output_dir=None):
    """A config with no file: the packaged defaults, rendered as key=value for the snapshot."""
    resolved = resolve({}, mode, seed, output_dir)
    source = config_utils.render_key_value(resolved)
    return ExperimentConfig.from_dict(resolved, source=source)
