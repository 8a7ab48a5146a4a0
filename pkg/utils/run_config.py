"""
Run Configuration
=================
Flat key=value run configuration, parsed with python-dotenv.

Precedence: command-line overrides > config file > defaults. Sidecar
metadata files use the same format and parse back into an equal RunConfig.
"""

import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values

from errors import SignHdgError
from meshing.mesh_builder import MeshPattern

logger = logging.getLogger(__name__)

METHODS = ("hdg", "cg")
EXPERIMENTS = ("cavity", "metamaterial", "manufactured")
DEFAULT_SLICE_X2 = {"cavity": 0.5, "manufactured": 0.5, "metamaterial": 1.0}


class ConfigError(SignHdgError):
    """Invalid or inconsistent run configuration."""
    module = "cli"


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a study or field run needs.

    Attributes:
        experiment: cavity, metamaterial or manufactured
        methods: Subset of (hdg, cg)
        k: Polynomial degrees, one table per degree
        levels: Mesh parameters n (cells per unit length), strictly increasing
        sigma_plus: σ₊
        kappa: Contrast σ₋/σ₊
        gamma: |τ| away from the interface
        pattern: mirrored or uniform diagonals
        output_dir: Where CSV and metadata files go
        quadrature_degree: Assembly rule override (default 2k+2)
        workers: Threads running levels concurrently
        slice_x2: Height of the slice line (experiment default if unset)
        slice_points: Points on the slice line
        sample_order: Lattice order of the per-element field samples
    """
    experiment: str = "cavity"
    methods: Tuple[str, ...] = ("hdg",)
    k: Tuple[int, ...] = (1,)
    levels: Tuple[int, ...] = (8, 16, 32, 64)
    sigma_plus: float = 1.0
    kappa: float = -1.001
    gamma: float = 1.0
    pattern: str = "mirrored"
    output_dir: str = "results"
    quadrature_degree: Optional[int] = None
    workers: int = 1
    slice_x2: Optional[float] = None
    slice_points: int = 201
    sample_order: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            ConfigError: On any invalid field
        """
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"Methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError(f"Duplicate methods: {self.methods}")
        if not self.k or any(k < 0 for k in self.k):
            raise ConfigError(f"Degrees must be non-negative, got {self.k}")
        if "cg" in self.methods and any(k < 1 for k in self.k):
            raise ConfigError("The cg method requires k >= 1")
        if not self.levels or any(n <= 0 for n in self.levels):
            raise ConfigError(f"Levels must be positive, got {self.levels}")
        if any(b <= a for a, b in zip(self.levels[:-1], self.levels[1:])):
            raise ConfigError(f"Levels must be strictly increasing, got {self.levels}")
        if not self.sigma_plus > 0:
            raise ConfigError(f"sigma_plus must be positive, got {self.sigma_plus}")
        if not self.kappa < 0:
            raise ConfigError(f"kappa must be negative, got {self.kappa}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        try:
            MeshPattern.parse(self.pattern)
        except SignHdgError as e:
            raise ConfigError(str(e)) from None
        if self.quadrature_degree is not None and self.quadrature_degree < 0:
            raise ConfigError(f"quadrature_degree must be non-negative, got {self.quadrature_degree}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.slice_points < 2:
            raise ConfigError(f"slice_points must be at least 2, got {self.slice_points}")
        if self.sample_order < 1:
            raise ConfigError(f"sample_order must be at least 1, got {self.sample_order}")

    @property
    def mesh_pattern(self) -> MeshPattern:
        return MeshPattern.parse(self.pattern)

    @property
    def slice_height(self) -> float:
        return DEFAULT_SLICE_X2[self.experiment] if self.slice_x2 is None else self.slice_x2

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with the given fields replaced; None values are ignored."""
        values = {key: value for key, value in overrides.items() if value is not None}
        unknown = set(values) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
        return replace(self, **{key: _coerce(key, value) for key, value in values.items()})

    # ============ Serialization ============

    def to_env(self) -> Dict[str, str]:
        """Field values as strings, in declaration order."""
        return {f.name: _format(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_mapping(cls, values: Mapping[str, Optional[str]], strict: bool = True) -> "RunConfig":
        """
        Build a config from string values.

        Args:
            values: key -> text, as read from a key=value file
            strict: Reject keys that are not config fields

        Raises:
            ConfigError: On unknown keys (strict) or unparsable values
        """
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if strict and unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
        parsed = {key: _coerce(key, value) for key, value in values.items() if key in names}
        return cls(**parsed)


# ============ Field parsing ============

_TUPLE_FIELDS = {"methods": str, "k": int, "levels": int}
_SCALAR_FIELDS = {
    "experiment": str, "sigma_plus": float, "kappa": float, "gamma": float, "pattern": str,
    "output_dir": str, "quadrature_degree": int, "workers": int, "slice_x2": float,
    "slice_points": int, "sample_order": int,
}
_OPTIONAL_FIELDS = {"quadrature_degree", "slice_x2"}


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _TUPLE_FIELDS:
            kind = _TUPLE_FIELDS[key]
            if isinstance(value, str):
                items = [item.strip() for item in value.split(",") if item.strip()]
            else:
                items = list(value)
            return tuple(kind(item.strip().lower()) if kind is str else kind(item) for item in items)
        if value is None or (isinstance(value, str) and value.strip() == ""):
            if key in _OPTIONAL_FIELDS:
                return None
            raise ConfigError(f"Missing value for {key}")
        kind = _SCALAR_FIELDS[key]
        if kind is str:
            return str(value).strip().lower() if key != "output_dir" else str(value).strip()
        return kind(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for {key}: {value!r} ({e})") from None


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(_format(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _quote(value: str) -> str:
    if value == "" or any(ch in value for ch in " #'\"="):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return value


# ============ Files ============

def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> RunConfig:
    """
    Load a key=value file and apply overrides.

    Raises:
        ConfigError: If the file is missing or holds invalid values
    """
    config = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        values = dotenv_values(path, interpolate=False)
        logger.info(f"Loaded {len(values)} settings from {path}")
        config = RunConfig.from_mapping(values)
    return config.with_overrides(**overrides)


def format_env(values: Mapping[str, str]) -> str:
    return "".join(f"{key}={_quote(str(value))}\n" for key, value in values.items())


def write_metadata(path: Union[str, Path], config: RunConfig, extra: Optional[Mapping[str, str]] = None) -> Path:
    """Write config fields followed by `extra` facts as key=value lines."""
    path = Path(path)
    values = dict(config.to_env())
    for key, value in (extra or {}).items():
        if key in values:
            raise ConfigError(f"Metadata key {key!r} collides with a config field")
        values[key] = str(value)
    atomic_write_text(path, format_env(values))
    return path


def read_metadata(path: Union[str, Path]) -> Tuple[RunConfig, Dict[str, str]]:
    """Parse a sidecar back into its RunConfig and the remaining facts."""
    values = dotenv_values(path, interpolate=False)
    names = {f.name for f in fields(RunConfig)}
    extra = {key: value for key, value in values.items() if key not in names}
    return RunConfig.from_mapping(values, strict=False), extra


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    tmp.replace(path)
