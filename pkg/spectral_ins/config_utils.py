import json
import logging

import yaml
from deepmerge import Merger

from spectral_ins import errors

logger = logging.getLogger(__name__)

override_merger = Merger([(dict, ["merge"]), (list, ["override"])], ["override"], ["override"])


def parse_value(raw):
    text = raw.strip()
    if text == "":
        return None
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        return text
    if isinstance(value, str):
        # yaml reads 1e-3 as a string
        try:
            return float(value)
        except ValueError:
            return value
    return value


def parse_key_value(text):
    """
    Parses flat dotted key=value text. Blank lines and lines starting with # are skipped.

    Returns the flat mapping and the line number of every key.
    """
    flat = {}
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped == "" or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise errors.ConfigError("expected key=value", line=number)
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key == "" or any(part == "" for part in key.split(".")):
            raise errors.ConfigError("empty key", field=key or None, line=number)
        if key in flat:
            raise errors.ConfigError(
                f"duplicate key, first set on line {lines[key]}", field=key, line=number
            )
        flat[key] = parse_value(raw)
        lines[key] = number
    return flat, lines


def parse_json(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise errors.ConfigError(e.msg, line=e.lineno)
    if not isinstance(data, dict):
        raise errors.ConfigError("a JSON config must be an object")
    return data


def expand(flat):
    nested = {}
    for key, value in flat.items():
        parts = key.split(".")
        target = nested
        for i, part in enumerate(parts[:-1]):
            existing = target.setdefault(part, {})
            if not isinstance(existing, dict):
                raise errors.ConfigError(
                    "is both a value and a section", field=".".join(parts[: i + 1])
                )
            target = existing
        if isinstance(target.get(parts[-1]), dict):
            raise errors.ConfigError("is both a value and a section", field=key)
        target[parts[-1]] = value
    return nested


def flatten(nested, prefix=""):
    flat = {}
    for key, value in nested.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict) and value:
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def merge(defaults, overrides):
    result = json.loads(json.dumps(defaults))
    return override_merger.merge(result, json.loads(json.dumps(overrides)))


def is_json(path, text):
    if path is not None and path.endswith(".json"):
        return True
    return text.lstrip().startswith("{")


def parse_text(text, path=None):
    if is_json(path, text):
        data = parse_json(text)
        return text, expand(flatten(data)), {}
    flat, lines = parse_key_value(text)
    return text, expand(flat), lines


def render_key_value(nested):
    """Inverse of parse_key_value + expand, one sorted line per dotted key."""
    result = []
    for key, value in sorted(flatten(nested).items()):
        text = value if isinstance(value, str) else json.dumps(value)
        result.append(f"{key}={text}")
    return "\n".join(result) + "\n"
