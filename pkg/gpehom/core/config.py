# Settings from the environment and the flat `key = value` run-config format.
from __future__ import annotations
import os
import re
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import ValidationError

from .models import RunConfig

logger = logging.getLogger(__name__)

_LINE = re.compile(r'^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$')
_ENV_PREFIX = "GPEHOM_"


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


@dataclass
class GpehomSettings:
    """Process-wide settings (environment variables prefixed GPEHOM_)."""
    log_level: str = "INFO"
    dense_cap: int = 4096
    workers: int = 1
    out_dir: str = "./gpe-out"

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "GpehomSettings":
        env = os.environ if environ is None else environ
        defaults = cls()

        def _int(name: str, default: int) -> int:
            raw = env.get(_ENV_PREFIX + name)
            if raw is None or raw.strip() == "":
                return default
            try:
                value = int(raw)
            except ValueError:
                logger.warning(f"Ignoring {_ENV_PREFIX}{name}={raw!r}: not an integer")
                return default
            if value < 1:
                logger.warning(f"Ignoring {_ENV_PREFIX}{name}={raw!r}: must be positive")
                return default
            return value

        return cls(
            log_level=(env.get(_ENV_PREFIX + "LOG_LEVEL") or defaults.log_level).upper(),
            dense_cap=_int("DENSE_CAP", defaults.dense_cap),
            workers=_int("WORKERS", defaults.workers),
            out_dir=env.get(_ENV_PREFIX + "OUT_DIR") or defaults.out_dir,
        )


def _strip_value(value: str, lineno: int) -> str:
    """Drop a trailing comment; a quoted value keeps any '#' inside the quotes."""
    value = value.strip()
    if value[:1] in ('"', "'"):
        close = value.find(value[0], 1)
        if close < 0:
            raise ConfigError(f"line {lineno}: unterminated quote in {value!r}")
        rest = value[close + 1:].strip()
        if rest and not rest.startswith('#'):
            raise ConfigError(f"line {lineno}: unexpected text after quoted value: {rest!r}")
        return value[1:close]
    comment_pos = value.find('#')
    if comment_pos >= 0:
        value = value[:comment_pos]
    return value.strip()


def parse_config_text(text: str) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        match = _LINE.match(line)
        if not match:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = match.groups()
        value = _strip_value(value, lineno)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def run_config_from_mapping(values: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(dict(values))
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {e}") from e


def parse_run_config(text: str) -> RunConfig:
    return run_config_from_mapping(parse_config_text(text))


def load_run_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Read a config file; non-None ``overrides`` replace file keys."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    values: Dict[str, Any] = parse_config_text(text)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    cfg = run_config_from_mapping(values)
    logger.debug(f"Loaded run config from {path}")
    return cfg


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if '#' in text or text != text.strip():
        return f'"{text}"'
    return text


def format_run_config(cfg: RunConfig) -> str:
    """Inverse of ``parse_run_config``; unset optional keys are omitted."""
    lines = []
    for key, value in cfg.model_dump().items():
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
