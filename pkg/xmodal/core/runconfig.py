"""Run configuration files.

A run configuration is a flat ``key=value`` file (comments with ``#``)
whose keys are grouped by prefix: ``train.``, ``encoder.``, ``metric.``,
``synth.`` and ``run.``. Command-line flags are merged on top of the file.
"""

import logging
from pathlib import Path
from typing import Iterable, Mapping, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from xmodal.core.config import settings
from xmodal.core.exceptions import ConfigError
from xmodal.core.seeding import derive_seed
from xmodal.schemas.encoder import EncoderConfig
from xmodal.schemas.metrics import MetricConfig
from xmodal.schemas.run import RunConfig, RunSection
from xmodal.schemas.synth import SynthConfig
from xmodal.schemas.training import TrainConfig

logger = logging.getLogger(__name__)

SECTIONS: dict[str, type[BaseModel]] = {
    "train": TrainConfig,
    "encoder": EncoderConfig,
    "metric": MetricConfig,
    "synth": SynthConfig,
    "run": RunSection,
}

PATH_KEYS = {"run.manifest", "run.vocab", "run.images"}

PIPELINE_REQUIRED = ("train.lr", "train.epochs", "train.batch")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Raw key/value pairs of a config file, relative paths resolved.

    Raises:
        ConfigError: Missing file or a key without a value.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        if value is None:
            raise ConfigError(f"config key '{key}' has no value", key=key)
        if key in PATH_KEYS and value and not Path(value).is_absolute():
            value = str((path.parent / value).resolve())
        values[key] = value
    return values


def _split_key(key: str) -> tuple[str, str]:
    section, _, field = key.partition(".")
    if section not in SECTIONS or field not in SECTIONS[section].model_fields:
        raise ConfigError(f"unknown configuration key '{key}'", key=key)
    return section, field


def build_run_config(
    values: Mapping[str, str], path: Optional[Path] = None
) -> RunConfig:
    """Validate flat key/value pairs into a :class:`RunConfig`.

    Raises:
        ConfigError: Unknown key or invalid value, naming the key.
    """
    grouped: dict[str, dict[str, str]] = {name: {} for name in SECTIONS}
    for key, value in values.items():
        section, field = _split_key(key)
        grouped[section][field] = value
    sections = {}
    for name, model in SECTIONS.items():
        try:
            sections[name] = model.model_validate(grouped[name])
        except ValidationError as e:
            error = e.errors()[0]
            field = ".".join(str(part) for part in error["loc"])
            key = f"{name}.{field}" if field else name
            raise ConfigError(f"invalid value for '{key}': {error['msg']}", key=key)
    return RunConfig(**sections, path=path, provided=frozenset(values))


def load_run_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, str]] = None,
    seed: Optional[int] = None,
) -> RunConfig:
    """Read a config file, apply flag overrides and thread the run seed.

    Stage seeds come from ``seed`` (the ``--seed`` flag) when given; otherwise
    explicit ``train.seed`` / ``synth.seed`` keys are kept and missing ones are
    derived from ``settings.DEFAULT_SEED``.
    """
    values = read_config_file(path) if path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for stage in ("train", "synth"):
        key = f"{stage}.seed"
        if seed is not None:
            values[key] = str(derive_seed(seed, stage))
        elif key not in values:
            values[key] = str(derive_seed(settings.DEFAULT_SEED, stage))
    run_config = build_run_config(values, Path(path) if path else None)
    logger.debug(f"Run configuration keys: {sorted(run_config.provided)}")
    return run_config


def require_keys(run_config: RunConfig, keys: Iterable[str]) -> None:
    """Raise :class:`ConfigError` naming the first of ``keys`` not set explicitly."""
    for key in keys:
        if key not in run_config.provided:
            raise ConfigError(f"missing config key '{key}'", key=key)
