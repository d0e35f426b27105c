"""Run configuration from flat ``key = value`` text and command-line flags.

A config file holds one ``key = value`` per line (``#`` comments allowed).
Optional ``[section]`` headers only group keys; they are flattened and a key
may appear once. Command-line flags override file values.
"""
from __future__ import annotations

import configparser
from pathlib import Path

from .errors import InvalidInputError

# key -> converter; keys match the long CLI flags with dashes as underscores
KEYS = {
    "counts": str,
    "offsets": str,
    "actuals": str,
    "out": str,
    "variant": str,
    "k": int,
    "iterations": int,
    "burnin": int,
    "thin": int,
    "l_m": int,
    "r_fixed": float,
    "seed": int,
    "m0": int,
    "level": float,
    "target_year": int,
    "era": str,
    "task_id": str,
    "reps": int,
    "r": float,
    "n": int,
    "m": int,
    "missing_frac": float,
}


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"config file {path} not found")
    text = path.read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str.lower
    try:
        parser.read_string("[__top__]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise InvalidInputError(f"{path}: {exc}".replace("\n", " ")) from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in KEYS:
                raise InvalidInputError(f"{path}: unknown key {key!r}")
            if key in values:
                raise InvalidInputError(f"{path}: key {key!r} given more than once")
            try:
                values[key] = KEYS[key](raw.strip())
            except ValueError:
                raise InvalidInputError(f"{path}: bad value {raw!r} for {key!r}") from None
    return values


def merge(file_values: dict, flag_values: dict, defaults: dict) -> dict:
    """defaults < config file < flags (flags left at None do not override)."""
    merged = dict(defaults)
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged
