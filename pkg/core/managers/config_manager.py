# core/managers/config_manager.py
"""
Loads a run configuration from TOML or YAML, merges it over DEFAULT_CONFIG,
applies command-line overrides and validates the result into a RunConfig.
"""
import copy
import hashlib
import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from core.binning import Binning
from core.errors import ConfigError
from core.vocabulary import (DEFAULT_CRUISE_SPEEDS_KMH, DEFAULT_SPEED_CAPS_KMH, MODES,
                             PROFILE_DIMENSIONS)

logger = logging.getLogger(__name__)

API_KEY_ENV = "MOBFORGE_LLM_API_KEY"

DEFAULT_CONFIG: Dict[str, Any] = {
    "run_seed": 20240101,
    "workers": 4,
    "paths": {
        "output_dir": "output",
        "cache_file": None,
    },
    "backend": {
        "kind": "replay",
        "endpoint": "https://api.openai.com/v1/chat/completions",
        "model": "gpt-4",
        "temperature_generation": 0.2,
        "temperature_gate": 0.0,
        "max_tokens": 1024,
        "max_retries": 4,
        "backoff_base_s": 1.0,
        "timeout_s": 120.0,
        "max_in_flight": 8,
        "strict_fixtures": True,
        "cache_enabled": True,
    },
    "ingest": {
        "strict": True,
    },
    "cohort": {
        "dimensions": list(PROFILE_DIMENSIONS.keys()),
        "min_cohort_size": 30,
        "max_depth": 4,
        "split_threshold": 7,
        "gate_jsd_scale": 0.3,
        "gate_max_retries": 2,
    },
    "patterns": {
        "holdout_fraction": 0.2,
        "eval_min_trajectories": 20,
        "revision_threshold": 0.5,
        "max_revision_rounds": 2,
        "time_tolerance_min": 60,
        "distance_tolerance": 0.5,
        "max_insights": 5,
    },
    "reasoner": {
        "max_rethinks": 3,
        "plan_reprompts": 1,
        "speed_caps_kmh": dict(DEFAULT_SPEED_CAPS_KMH),
        "cruise_speeds_kmh": dict(DEFAULT_CRUISE_SPEEDS_KMH),
        "mode_distance_bands_m": [1000.0, 3000.0, 10000.0],
    },
    "spatial": {
        "snap_radius_m": 500.0,
        "strict_pois": False,
    },
    "evaluation": {
        "sd_bins": 32,
        "sd_min_m": 100.0,
        "sd_max_m": 100000.0,
        "si_bin_min": 30,
        "dailyloc_max": 15,
        "grid_cell_m": 1000.0,
        "day_filters": ["all"],
        "subsets": [["age_band"], ["age_band", "income"], ["age_band", "occupation"],
                    ["age_band", "income", "occupation"]],
        "windows": [],
        "write_plots": True,
        "write_slice_plots": False,
    },
    "generation": {
        "mode": "mirror",
        "count": 500,
        "start_date": "2024-03-04",
        "days": 1,
        "filters": {},
        "home_area": None,
        "persons_per_profile": 1,
    },
    "ablation": {
        "disable_self_evaluation": False,
        "disable_rethink": False,
        "pattern_dims_override": None,
    },
}

# Keys left out of the config hash: they change where things go, not what is produced.
HASH_EXCLUDED_KEYS = ("paths", "workers", "log_level")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    output_dir: str = "output"
    cache_file: Optional[str] = None
    survey_profiles: Optional[str] = None
    survey_trips: Optional[str] = None
    source_dataset: Optional[str] = None
    synth_spec: Optional[str] = None
    network_nodes: Optional[str] = None
    network_edges: Optional[str] = None
    network_pois: Optional[str] = None
    cohort_tree: Optional[str] = None
    patterns: Optional[str] = None
    generated_dataset: Optional[str] = None
    fixture_file: Optional[str] = None


class BackendConfig(_Section):
    kind: Literal["remote", "scripted", "replay"] = "replay"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4"
    temperature_generation: float = Field(0.2, ge=0.0, le=2.0)
    temperature_gate: float = Field(0.0, ge=0.0, le=2.0)
    max_tokens: int = Field(1024, ge=1)
    max_retries: int = Field(4, ge=0)
    backoff_base_s: float = Field(1.0, ge=0.0)
    timeout_s: float = Field(120.0, gt=0.0)
    max_in_flight: int = Field(8, ge=1)
    strict_fixtures: bool = True
    cache_enabled: bool = True


class IngestConfig(_Section):
    strict: bool = True


class CohortConfig(_Section):
    dimensions: List[str] = Field(default_factory=lambda: list(PROFILE_DIMENSIONS.keys()))
    min_cohort_size: int = Field(30, ge=1)
    max_depth: int = Field(4, ge=0)
    split_threshold: int = Field(7, ge=1, le=10)
    gate_jsd_scale: float = Field(0.3, gt=0.0)
    gate_max_retries: int = Field(2, ge=0)

    @field_validator("dimensions")
    @classmethod
    def _known_dimensions(cls, value: List[str]) -> List[str]:
        unknown = [d for d in value if d not in PROFILE_DIMENSIONS]
        if unknown:
            raise ValueError(f"unknown dimensions {unknown}")
        if len(set(value)) != len(value):
            raise ValueError("dimensions must be distinct")
        return value


class PatternConfig(_Section):
    holdout_fraction: float = Field(0.2, ge=0.0, lt=1.0)
    eval_min_trajectories: int = Field(20, ge=1)
    revision_threshold: float = Field(0.5, ge=0.0, le=1.0)
    max_revision_rounds: int = Field(2, ge=0)
    time_tolerance_min: int = Field(60, ge=0)
    distance_tolerance: float = Field(0.5, ge=0.0)
    max_insights: int = Field(5, ge=0)


class ReasonerConfig(_Section):
    max_rethinks: int = Field(3, ge=0)
    plan_reprompts: int = Field(1, ge=0)
    speed_caps_kmh: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_SPEED_CAPS_KMH))
    cruise_speeds_kmh: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_CRUISE_SPEEDS_KMH))
    mode_distance_bands_m: List[float] = Field(default_factory=lambda: [1000.0, 3000.0, 10000.0])

    @field_validator("speed_caps_kmh", "cruise_speeds_kmh")
    @classmethod
    def _covers_all_modes(cls, value: Dict[str, float]) -> Dict[str, float]:
        missing = [m for m in MODES if m not in value]
        if missing:
            raise ValueError(f"missing modes {missing}")
        if any(v <= 0 for v in value.values()):
            raise ValueError("speeds must be positive")
        return value


class GridConfig(_Section):
    rows: int = Field(30, ge=2)
    cols: int = Field(30, ge=2)
    spacing_m: float = Field(250.0, gt=0.0)
    origin_lat: float = Field(22.54, ge=-90.0, le=90.0)
    origin_lon: float = Field(114.05, ge=-180.0, le=180.0)
    pois_per_category: int = Field(40, ge=1)
    seed: int = 7


class SpatialConfig(_Section):
    snap_radius_m: float = Field(500.0, gt=0.0)
    strict_pois: bool = False
    grid: Optional[GridConfig] = None


class EvaluationConfig(_Section):
    sd_bins: int = Field(32, ge=1)
    sd_min_m: float = Field(100.0, gt=0.0)
    sd_max_m: float = Field(100000.0, gt=0.0)
    si_bin_min: int = Field(30, ge=1)
    dailyloc_max: int = Field(15, ge=1)
    grid_cell_m: float = Field(1000.0, gt=0.0)
    day_filters: List[Literal["all", "weekday", "weekend"]] = Field(default_factory=lambda: ["all"])
    subsets: List[List[str]] = Field(default_factory=list)
    windows: List[List[int]] = Field(default_factory=list)
    write_plots: bool = True
    write_slice_plots: bool = False

    def binning(self) -> Binning:
        return Binning(self.sd_bins, self.sd_min_m, self.sd_max_m, self.si_bin_min,
                       self.dailyloc_max, self.grid_cell_m)


class HomeArea(_Section):
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    radius_m: float = Field(gt=0.0)


class GenerationConfig(_Section):
    """Target population for `generate`."""
    mode: Literal["mirror", "sample"] = "mirror"
    count: int = Field(500, ge=1)
    start_date: str = "2024-03-04"
    days: int = Field(1, ge=1)
    filters: Dict[str, List[Any]] = Field(default_factory=dict)
    home_area: Optional[HomeArea] = None
    persons_per_profile: int = Field(1, ge=1)


class AblationConfig(_Section):
    disable_self_evaluation: bool = False
    disable_rethink: bool = False
    pattern_dims_override: Optional[List[str]] = None


class RunConfig(_Section):
    run_seed: int = Field(20240101, ge=0, lt=2 ** 64)
    workers: int = Field(4, ge=1)
    log_level: str = "INFO"
    paths: PathsConfig = Field(default_factory=PathsConfig)
    backend: BackendConfig = Field(default_factory=BackendConfig)
    ingest: IngestConfig = Field(default_factory=IngestConfig)
    cohort: CohortConfig = Field(default_factory=CohortConfig)
    patterns: PatternConfig = Field(default_factory=PatternConfig)
    reasoner: ReasonerConfig = Field(default_factory=ReasonerConfig)
    spatial: SpatialConfig = Field(default_factory=SpatialConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    generation: GenerationConfig = Field(default_factory=GenerationConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    base_dir: str = "."

    def config_hash(self) -> str:
        data = self.model_dump(mode="json", exclude=set(HASH_EXCLUDED_KEYS) | {"base_dir"})
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolve(self, path: Optional[str]) -> Optional[Path]:
        """Resolves a configured path relative to the config file's directory."""
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.paths.output_dir)

    def api_key(self) -> Optional[str]:
        return os.environ.get(API_KEY_ENV)


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def read_document(path: Path) -> Dict[str, Any]:
    """Reads a TOML or YAML document, chosen by suffix."""
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            with open(path, "r", encoding="utf-8") as f:
                return yaml.safe_load(f) or {}
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Configuration file not found at {path}", path=str(path))
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Error decoding configuration file {path}: {e}", path=str(path))


class ConfigManager:
    """Manages loading and accessing the run configuration."""

    def __init__(self, config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None):
        load_dotenv()
        self.config_path = Path(config_path) if config_path else None
        file_config = read_document(self.config_path) if self.config_path else {}
        if not isinstance(file_config, dict):
            raise ConfigError(f"Configuration root must be a table, got {type(file_config).__name__}")
        self.config = deep_merge(DEFAULT_CONFIG, file_config)
        for key, value in (overrides or {}).items():
            if value is not None:
                self._set(key, value)
        if self.config_path:
            self.config["base_dir"] = str(self.config_path.resolve().parent)
        logger.info(f"Configuration loaded from '{self.config_path or 'defaults'}'.")

    def _set(self, key: str, value: Any):
        node = self.config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def get(self, key: str, default: Any = None) -> Any:
        """
        Retrieves a value from the merged configuration using dot notation.

        Args:
            key: The key to retrieve (e.g., "cohort.min_cohort_size").
            default: Returned when the key is absent.
        """
        value = self.config
        for k in key.split("."):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def run_config(self) -> RunConfig:
        try:
            return RunConfig.model_validate(self.config)
        except ValidationError as e:
            keys = [".".join(str(part) for part in err["loc"]) for err in e.errors()]
            raise ConfigError(f"Invalid configuration: {e}", keys=keys)
