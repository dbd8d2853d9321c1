"""Flat ``key = value`` configuration files, overrides and sweep expansion."""

from __future__ import annotations

import configparser
import itertools
from dataclasses import fields

from .harness import ExperimentConfig

SECTION = "config"

INT_KEYS = {"d", "m_per_axis", "n_init", "n_steps", "top_n", "replicates", "master_seed", "max_candidates",
            "workers"}
FLOAT_KEYS = {"a", "sigma2", "alpha", "ci_alpha", "kappa", "kernel_variance", "gamma", "bandwidth", "tau2"}
OPTIONAL_FLOAT_KEYS = {"length_scale", "side"}
BOOL_KEYS = {"timing"}
TUPLE_KEYS = {"methods", "feature_columns"}  # always lists, never sweep axes
STR_KEYS = {"algorithm", "rule", "family", "data_path", "response_column"}

# keys read by individual commands rather than by ExperimentConfig
COMMAND_KEYS = {"instances", "scan_points", "replicate_id", "mask"}

KNOWN_KEYS = {f.name for f in fields(ExperimentConfig)} | COMMAND_KEYS


class ConfigError(ValueError):
    pass


def parse_text(text: str) -> dict[str, str]:
    """Read ``key = value`` lines (``#`` or ``;`` comments) into a raw string dict."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    raw = dict(parser[SECTION])
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def load(path) -> dict[str, str]:
    try:
        with open(path) as fh:
            return parse_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def apply_overrides(raw: dict[str, str], overrides) -> dict[str, str]:
    out = dict(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _convert(key: str, text: str):
    try:
        if key in INT_KEYS:
            return int(text)
        if key in FLOAT_KEYS:
            return float(text)
        if key in OPTIONAL_FLOAT_KEYS:
            return None if text.lower() in ("", "none", "default") else float(text)
        if key in BOOL_KEYS:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if key in STR_KEYS:
            return None if text.lower() == "none" else text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc
    raise ConfigError(f"unknown config key {key!r}")


def expand(raw: dict[str, str]) -> tuple[list[ExperimentConfig], list[str]]:
    """Build one `ExperimentConfig` per grid point.

    Any comma-separated value other than ``methods`` / ``feature_columns`` is
    a sweep axis; axes combine as a Cartesian product in file order.
    """
    fixed: dict = {}
    axes: list[tuple[str, list]] = []
    for key, text in raw.items():
        if key in COMMAND_KEYS:
            continue
        if key in TUPLE_KEYS:
            fixed[key] = tuple(_split(text))
            continue
        parts = _split(text) if "," in text else [text.strip()]
        values = [_convert(key, p) for p in parts]
        if len(values) > 1:
            axes.append((key, values))
        else:
            fixed[key] = values[0]
    configs = []
    for combo in itertools.product(*(vals for _, vals in axes)) if axes else [()]:
        kw = dict(fixed)
        kw.update({k: v for (k, _), v in zip(axes, combo)})
        try:
            configs.append(ExperimentConfig(**kw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration {kw}: {exc}") from exc
    return configs, [k for k, _ in axes]


def command_value(raw: dict[str, str], key: str, default, kind=int):
    if key not in raw:
        return default
    try:
        return kind(raw[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def effective_items(raw: dict[str, str]) -> list[tuple[str, str]]:
    """Every known key with its effective value, for echoing into outputs."""
    defaults = {f.name: f.default for f in fields(ExperimentConfig)}
    items = []
    for key in [f.name for f in fields(ExperimentConfig)] + sorted(COMMAND_KEYS):
        if key in raw:
            items.append((key, raw[key]))
        elif key in defaults:
            v = defaults[key]
            items.append((key, ", ".join(v) if isinstance(v, tuple) else ("" if v is None else str(v))))
    return items
