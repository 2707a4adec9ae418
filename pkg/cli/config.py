"""
Run Configuration

Plain `key = value` config files, merged with command-line flags (flags
win) and validated by the pydantic models of the command. Every command
writes the resolved values next to its outputs in the same format, so a
run can be repeated with `--config resolved_config.txt`.
"""

import logging
import os
from pathlib import Path
from typing import Dict, Iterable, Literal, Mapping, Optional, Type, TypeVar

from pydantic import BaseModel, Field, ValidationError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class ConfigError(ValueError):
    """Invalid configuration file or flag value"""


class EvalConfig(BaseModel):
    """Settings of `eval`"""
    split: str = "eval"
    n_eval: int = Field(4096, ge=2)
    lag: int = Field(8, ge=0)
    seed: int = 0
    resampling: Literal["multinomial", "systematic"] = "multinomial"
    threads: int = Field(1, ge=1)


class SampleObsConfig(BaseModel):
    """Settings of `sample-obs`"""
    split: str = "eval"
    n_objects: Optional[int] = Field(None, ge=1)
    seed: int = 0


def load_config_file(path: Optional[Path]) -> Dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment"""
    if path is None:
        return {}
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{number}: empty key")
        values[key] = value
    return values


def merge(file_values: Mapping[str, object], flags: Mapping[str, object],
          allowed: Iterable[str]) -> Dict[str, object]:
    """File values overridden by flags that were given; unknown keys rejected"""
    allowed = set(allowed)
    unknown = sorted(set(file_values) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = {k: _none_if_empty(v) for k, v in file_values.items()}
    merged.update({k: v for k, v in flags.items() if v is not None and k in allowed})
    return merged


def resolve(model: Type[ModelT], values: Mapping[str, object]) -> ModelT:
    """Validate the subset of `values` that `model` declares"""
    fields = {k: v for k, v in values.items() if k in model.model_fields and v is not None}
    try:
        return model(**fields)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid {model.__name__}: {problems}") from None


def fields_of(*models: Type[BaseModel]) -> set:
    return {name for model in models for name in model.model_fields}


def _none_if_empty(value):
    if isinstance(value, str) and value.lower() in ("", "none", "null"):
        return None
    return value


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_resolved_config(output_dir: Path, command: str,
                          sections: Mapping[str, object], inputs: Mapping[str, object] = None) -> Path:
    """
    Write resolved_config.txt

    Args:
        output_dir: directory of the run outputs
        command: CLI command name, recorded as a comment
        sections: pydantic models or plain dicts, written in order
        inputs: input paths, recorded as comments only
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"# resolved configuration of '{command}'"]
    lines.extend(f"# {key}: {value}" for key, value in (inputs or {}).items())
    for name, section in sections.items():
        values = section.model_dump() if isinstance(section, BaseModel) else dict(section)
        lines.append(f"# [{name}]")
        lines.extend(f"{key} = {_format_value(val)}" for key, val in values.items())
    path = output_dir / RESOLVED_CONFIG_FILE
    path.write_text("\n".join(lines) + "\n")
    logger.info("resolved config written to %s", path)
    return path


def default_threads() -> int:
    """Worker count from PFSEFI_THREADS, else 1"""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be >= 1, got {threads}")
    return threads


RESOLVED_CONFIG_FILE = "resolved_config.txt"
THREADS_ENV_VAR = "PFSEFI_THREADS"
