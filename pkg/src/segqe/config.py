"""Experiment configuration: schema validation and layered overrides.

Precedence, lowest first: built-in defaults, the config file, ``SEGQE_*``
environment variables, command-line flags.  The merged result is validated
against ``config.schema.json`` before anything runs.
"""
from __future__ import annotations

import copy
import json
import os
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

DEFAULTS: dict[str, Any] = {
    "gateset": "pauli2",
    "generators": [],
    "initial": "zeros",
    "engine": {
        "max_depth": 100,
        "threshold": 1e-3,
        "mode": "exact",
        "shots": None,
        "optimizer_budget": 3000,
        "seed": 0,
        "verify": None,
    },
    "output": "segqe-out",
    "metrics": {"trace": True, "circuit": True, "ground_state": True},
}

# environment variable -> (config path, parser)
ENV_OVERRIDES = {
    "SEGQE_GATESET": (("gateset",), str),
    "SEGQE_MODE": (("engine", "mode"), str),
    "SEGQE_SHOTS": (("engine", "shots"), int),
    "SEGQE_SEED": (("engine", "seed"), int),
    "SEGQE_THRESHOLD": (("engine", "threshold"), float),
    "SEGQE_MAX_DEPTH": (("engine", "max_depth"), int),
    "SEGQE_BUDGET": (("engine", "optimizer_budget"), int),
    "SEGQE_OUTPUT": (("output",), str),
}
WORKERS_ENV = "SEGQE_WORKERS"


class ConfigError(ValueError):
    """Configuration that fails the schema or cannot be resolved."""


def schema() -> dict:
    text = resources.files("segqe").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, update: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set(cfg: dict, path: tuple[str, ...], value) -> None:
    node = cfg
    for key in path[:-1]:
        node = node.setdefault(key, {})
    node[path[-1]] = value


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, (path, parse) in ENV_OVERRIDES.items():
        if name in environ:
            try:
                _set(out, path, parse(environ[name]))
            except ValueError as exc:
                raise ConfigError(f"environment variable {name}: {exc}") from None
    return out


def validate(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at '{where}': {err.message}")


def resolve(
    file_cfg: Mapping | None = None,
    flag_cfg: Mapping | None = None,
    environ: Mapping[str, str] | None = None,
) -> dict:
    cfg = _merge(DEFAULTS, file_cfg or {})
    cfg = _merge(cfg, env_overrides(environ))
    cfg = _merge(cfg, flag_cfg or {})
    validate(cfg)
    return cfg


def load_file(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def workers(environ: Mapping[str, str] | None = None) -> int:
    environ = os.environ if environ is None else environ
    raw = environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return value
