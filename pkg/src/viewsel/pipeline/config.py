from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from viewsel.clustering.associate import AssociationConfig
from viewsel.clustering.grid import GridConfig
from viewsel.selection.problem import SelectionConfig, WarmStartMode

CONFIG_FILENAME = "viewsel.yaml"

_SECTIONS: dict[str, type] = {
    "grid": GridConfig,
    "association": AssociationConfig,
    "selection": SelectionConfig,
}
_TOP_LEVEL_KEYS = ("parallelism", "match_threshold")


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    assoc: AssociationConfig = field(default_factory=AssociationConfig)
    select: SelectionConfig = field(default_factory=SelectionConfig)
    match_threshold: int = 5
    parallelism: int = 0

    def __post_init__(self) -> None:
        if self.match_threshold < 1:
            raise ValueError(f"match_threshold must be at least 1, got {self.match_threshold}")
        if self.parallelism < 0:
            raise ValueError(f"parallelism must be >= 0 (0 = auto), got {self.parallelism}")

    def to_dict(self) -> dict[str, Any]:
        select = asdict(self.select)
        select["warm_start_mode"] = self.select.warm_start_mode.value
        return {
            "grid": asdict(self.grid),
            "association": asdict(self.assoc),
            "selection": select,
            "match_threshold": self.match_threshold,
            "parallelism": self.parallelism,
        }


def _discover_config_path() -> Path | None:
    """Walk up from cwd looking for viewsel.yaml."""
    current = Path.cwd().resolve()
    for parent in [current, *current.parents]:
        if (parent / CONFIG_FILENAME).exists():
            return parent / CONFIG_FILENAME
    return None


def _read_config(path: Path) -> dict:
    if not path.exists():
        raise FileNotFoundError(f"config file not found at {path}")
    with open(path) as f:
        raw = yaml.safe_load(f)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path} must hold a mapping, got {type(raw).__name__}")
    return raw


def _section_kwargs(section: str, values: Any, path: Path) -> dict[str, Any]:
    if not isinstance(values, dict):
        raise ValueError(f"section '{section}' in {path} must be a mapping")
    allowed = [f.name for f in fields(_SECTIONS[section])]
    unknown = sorted(set(values) - set(allowed))
    if unknown:
        raise KeyError(
            f"unknown keys {unknown} in section '{section}' of {path}. "
            f"Allowed: {allowed}"
        )
    kwargs = dict(values)
    if section == "selection" and "warm_start_mode" in kwargs:
        kwargs["warm_start_mode"] = WarmStartMode(str(kwargs["warm_start_mode"]).lower())
    return kwargs


def config_from_dict(raw: dict, path: Path | str = "<dict>") -> PipelineConfig:
    path = Path(path)
    unknown = sorted(set(raw) - set(_SECTIONS) - set(_TOP_LEVEL_KEYS))
    if unknown:
        raise KeyError(
            f"unknown sections {unknown} in {path}. "
            f"Allowed: {[*_SECTIONS, *_TOP_LEVEL_KEYS]}"
        )
    built = {
        section: cls(**_section_kwargs(section, raw.get(section) or {}, path))
        for section, cls in _SECTIONS.items()
    }
    top = {key: raw[key] for key in _TOP_LEVEL_KEYS if key in raw}
    return PipelineConfig(
        grid=built["grid"], assoc=built["association"], select=built["selection"], **top
    )


def load_pipeline_config(path: Path | str | None = None) -> PipelineConfig:
    """Load a pipeline config from YAML; discovers viewsel.yaml when ``path`` is None.

    Missing sections keep their defaults. Without any config file the
    defaults are returned.
    """
    if path is None:
        discovered = _discover_config_path()
        if discovered is None:
            return PipelineConfig()
        path = discovered
    path = Path(path).resolve()
    return config_from_dict(_read_config(path), path)


def validate_config_yaml(path: Path | str) -> None:
    """Validate a config file without side effects.

    Collects all errors before raising so the caller sees every problem at once.
    Raises FileNotFoundError if the file is missing, ValueError otherwise.
    """
    path = Path(path).resolve()
    raw = _read_config(path)
    errors: list[str] = []

    for section in sorted(set(raw) - set(_SECTIONS) - set(_TOP_LEVEL_KEYS)):
        errors.append(f"unknown section '{section}'")

    for section, cls in _SECTIONS.items():
        if section not in raw:
            continue
        try:
            cls(**_section_kwargs(section, raw[section] or {}, path))
        except (KeyError, ValueError, TypeError) as e:
            errors.append(f"section '{section}': {e}")

    for key in _TOP_LEVEL_KEYS:
        if key in raw and (not isinstance(raw[key], int) or isinstance(raw[key], bool)):
            errors.append(f"'{key}' must be an integer, got {raw[key]!r}")
    if not errors:
        try:
            config_from_dict(raw, path)
        except (KeyError, ValueError, TypeError) as e:
            errors.append(str(e))

    if errors:
        raise ValueError("\n".join(errors))
