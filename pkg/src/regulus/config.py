"""Experiment configuration: JSON schema, validation and error locations."""
from __future__ import annotations

import json

import jsonschema

from .errors import RegulusError

__all__ = ["CONFIG_SCHEMA", "ConfigError", "load_config", "locate_line", "build_problem", "PROBLEM_TYPES"]

PROBLEM_TYPES = ("deblur1d", "deblur2d", "tomo", "dynamic_tomo")

_SELECTOR = {
    "oneOf": [
        {"type": "string"},
        {"type": "number"},
        {
            "type": "object",
            "properties": {
                "kind": {"enum": ["fixed", "dp", "gcv"]},
                "value": {"type": "number"},
                "delta": {"type": "number", "minimum": 0},
                "eta": {"type": "number", "exclusiveMinimum": 1},
                "variant": {"enum": ["full", "projected"]},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "regulus experiment",
    "type": "object",
    "required": ["problem", "solvers"],
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": list(PROBLEM_TYPES)},
                "params": {"type": "object"},
                "noise": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["gaussian", "laplace", "impulse"]},
                        "level": {"type": "number", "exclusiveMinimum": 0},
                        "fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    },
                },
                "seed": {"type": "integer", "minimum": 0},
                "commit_crime": {"type": "boolean"},
            },
        },
        "solvers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "label": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "params": {"type": "object"},
                    "selector": _SELECTOR,
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "image_format": {"enum": ["pgm", "none"]},
                "emit_history": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(RegulusError):
    """Invalid configuration; ``line`` is the 1-based line of the offending field (or None)."""

    def __init__(self, message, path=(), line=None, source=None):
        self.path = tuple(path)
        self.line = line
        self.source = source
        field = _path_str(self.path)
        where = f"{source}:{line}" if source and line else (source or "config")
        super().__init__(f"{where}: {field + ': ' if field else ''}{message}")


def _path_str(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _skip_ws(text, pos):
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


def locate_line(text, path):
    """1-based line on which the value at ``path`` starts (deepest reachable prefix)."""
    dec = json.JSONDecoder()
    pos = _skip_ws(text, 0)
    key_pos = pos
    for comp in path:
        if pos >= len(text):
            break
        if text[pos] == "{" and isinstance(comp, str):
            p = _skip_ws(text, pos + 1)
            found = False
            while p < len(text) and text[p] != "}":
                key, end = dec.raw_decode(text, p)
                kp = p
                p = _skip_ws(text, end)
                p = _skip_ws(text, p + 1)  # ':'
                if key == comp:
                    pos, key_pos, found = p, kp, True
                    break
                _, p = dec.raw_decode(text, p)
                p = _skip_ws(text, p)
                if p < len(text) and text[p] == ",":
                    p = _skip_ws(text, p + 1)
            if not found:
                break
        elif text[pos] == "[" and isinstance(comp, int):
            p = _skip_ws(text, pos + 1)
            i = 0
            while p < len(text) and text[p] != "]" and i < comp:
                _, p = dec.raw_decode(text, p)
                p = _skip_ws(text, p)
                if p < len(text) and text[p] == ",":
                    p = _skip_ws(text, p + 1)
                i += 1
            if i != comp or p >= len(text) or text[p] == "]":
                break
            pos = key_pos = p
        else:
            break
    return text.count("\n", 0, key_pos) + 1


def load_config(path):
    """Read, parse and schema-validate a configuration file.

    Raises
    ------
    ConfigError
        With the line of the offending field.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror}", source=str(path)) from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg}", line=err.lineno, source=str(path)) from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        p = list(err.absolute_path)
        if err.validator in ("additionalProperties", "required") and isinstance(err.instance, dict):
            extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
            if err.validator == "additionalProperties" and extra:
                p = p + [extra[0]]
        raise ConfigError(err.message, p, locate_line(text, p), str(path))
    return cfg, text


def build_problem(pcfg, seed=None):
    """Instantiate the test problem described by the ``problem`` section."""
    from . import testproblems as tp

    kind = pcfg["type"]
    params = dict(pcfg.get("params", {}))
    noise = dict(pcfg.get("noise", {}))
    noise["seed"] = int(seed if seed is not None else pcfg.get("seed", 0))
    crime = bool(pcfg.get("commit_crime", False))
    fn = {"deblur1d": tp.deblur1d, "deblur2d": tp.deblur2d, "tomo": tp.tomo,
          "dynamic_tomo": tp.dynamic_tomo}[kind]
    return fn(noise=noise, commit_crime=crime, **params)
