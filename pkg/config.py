"""Configuration management for the hazeorder dehazing system.

Pipeline parameters (DehazeConfig) and process settings (AppConfig), layered
from defaults, a JSON file and HAZEORDER_* environment variables.
"""

import os
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from utils.file_lock import atomic_write, file_lock
from utils.validation import (
    ConfigError,
    get_validation_errors,
    validate_airlight,
    validate_choice,
    validate_fraction,
    validate_open_unit,
    validate_positive,
    validate_window,
)

logger = logging.getLogger(__name__)

WEIGHT_FUNCTIONS = ("phi1", "phi2", "phi3")
LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def _validate_at_least(value: float, minimum: float, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got: {value!r}")
    if not value >= minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got: {value}")
    return value


def _validate_tiles(tiles, name: str) -> Tuple[int, int]:
    if len(tiles) != 2 or any(not isinstance(t, int) or t < 1 for t in tiles):
        raise ConfigError(f"{name} must be two integers >= 1, got: {tiles!r}")
    return tuple(tiles)


@dataclass(frozen=True)
class DehazeConfig:
    """Pipeline parameters for one dehaze run"""

    # Depth-order extraction and global optimization
    r: int = 35
    epsilon: float = 0.02
    weight_fn: str = "phi2"
    theta_hat_scale: Optional[float] = None  # rough θ̂ = scale * max θ_r, debug only

    # Transmission refinement (guided_radius is the odd window side)
    guided_radius: int = 35
    guided_eps: float = 1e-4
    t_floor: float = 0.01

    # Post-processing
    apply_clahe: bool = True
    clahe_tiles: Tuple[int, int] = (8, 8)
    clahe_clip: float = 2.0

    # Airlight
    airlight_override: Optional[Tuple[float, ...]] = None
    airlight_patch: int = 15
    airlight_top_fraction: float = 0.001

    # Depth files
    depth_scale: float = 10.0

    def validate(self) -> List[str]:
        """Validate configuration and return list of errors"""
        checks = [
            (validate_window, [self.r, "r", 3]),
            (validate_fraction, [self.epsilon, "epsilon"]),
            (validate_choice, [self.weight_fn, WEIGHT_FUNCTIONS, "weight_fn"]),
            (validate_window, [self.guided_radius, "guided_radius"]),
            (validate_positive, [self.guided_eps, "guided_eps"]),
            (validate_open_unit, [self.t_floor, "t_floor"]),
            (_validate_tiles, [self.clahe_tiles, "clahe_tiles"]),
            (validate_positive, [self.clahe_clip, "clahe_clip"]),
            (validate_window, [self.airlight_patch, "airlight_patch"]),
            (validate_positive, [self.airlight_top_fraction, "airlight_top_fraction"]),
            (validate_fraction, [self.airlight_top_fraction, "airlight_top_fraction"]),
            (validate_positive, [self.depth_scale, "depth_scale"]),
        ]
        if self.theta_hat_scale is not None:
            checks.append((_validate_at_least, [self.theta_hat_scale, 1.0, "theta_hat_scale"]))
        if self.airlight_override is not None:
            checks.append((validate_airlight, [self.airlight_override, "airlight_override"]))
        return get_validation_errors(checks)

    def checked(self) -> 'DehazeConfig':
        """Return self, raising ConfigError listing every problem"""
        errors = self.validate()
        if errors:
            raise ConfigError("Invalid dehaze configuration:\n" + "\n".join(f"  - {e}" for e in errors))
        return self

    def with_overrides(self, **overrides: Any) -> 'DehazeConfig':
        """Copy with the given non-None fields replaced, validated"""
        updates = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **updates).checked()

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['clahe_tiles'] = list(self.clahe_tiles)
        if self.airlight_override is not None:
            data['airlight_override'] = list(self.airlight_override)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DehazeConfig':
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                logger.warning(f"Unknown dehaze configuration key: {key}")
                continue
            if key in ('clahe_tiles', 'airlight_override') and value is not None:
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)


@dataclass
class AppConfig:
    """Process-level configuration"""

    dehaze: DehazeConfig = field(default_factory=DehazeConfig)

    # Batch parallelism, 0 = one worker per CPU
    threads: int = 0

    # Analysis
    full_rank: bool = False
    max_rank_samples: int = 100_000

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @classmethod
    def from_env(cls) -> 'AppConfig':
        """Create configuration from environment variables"""
        config = cls()

        env_mappings = {
            'HAZEORDER_THREADS': ('threads', int),
            'HAZEORDER_LOG_LEVEL': ('log_level', str.upper),
            'HAZEORDER_MAX_RANK_SAMPLES': ('max_rank_samples', int),
        }
        dehaze_mappings = {
            'HAZEORDER_R': ('r', int),
            'HAZEORDER_EPSILON': ('epsilon', float),
            'HAZEORDER_WEIGHT_FN': ('weight_fn', str.lower),
        }

        for env_var, (attr_name, converter) in env_mappings.items():
            env_value = os.getenv(env_var)
            if env_value:
                try:
                    setattr(config, attr_name, converter(env_value))
                    logger.info(f"Using environment variable {env_var}")
                except (ValueError, TypeError) as e:
                    logger.warning(f"Invalid value for {env_var}: {env_value} ({e})")

        dehaze_updates = {}
        for env_var, (attr_name, converter) in dehaze_mappings.items():
            env_value = os.getenv(env_var)
            if env_value:
                try:
                    dehaze_updates[attr_name] = converter(env_value)
                    logger.info(f"Using environment variable {env_var}")
                except (ValueError, TypeError) as e:
                    logger.warning(f"Invalid value for {env_var}: {env_value} ({e})")
        if dehaze_updates:
            config.dehaze = replace(config.dehaze, **dehaze_updates)

        return config

    @classmethod
    def from_file(cls, config_path: Path) -> 'AppConfig':
        """Load configuration from JSON file"""
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError:
            logger.info(f"Config file not found: {config_path}, using defaults")
            return cls()
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in config file {config_path}: {e}")

        config = cls()
        for key, value in data.items():
            if key == 'dehaze':
                config.dehaze = DehazeConfig.from_dict(value)
            elif hasattr(config, key):
                setattr(config, key, value)
            else:
                logger.warning(f"Unknown configuration key: {key}")

        logger.info(f"Configuration loaded from {config_path}")
        return config

    def validate(self) -> List[str]:
        """Validate configuration and return list of errors"""
        errors = list(self.dehaze.validate())
        errors.extend(get_validation_errors([
            (_validate_at_least, [self.threads, 0, "threads"]),  # 0 = one per CPU
            (_validate_at_least, [self.max_rank_samples, 2, "max_rank_samples"]),
            (validate_choice, [self.log_level, LOG_LEVELS, "log_level"]),
        ]))
        return errors

    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary"""
        return {
            'dehaze': self.dehaze.to_dict(),
            'threads': self.threads,
            'full_rank': self.full_rank,
            'max_rank_samples': self.max_rank_samples,
            'log_level': self.log_level,
            'log_format': self.log_format,
        }

    def save_to_file(self, config_path: Path) -> None:
        """Save configuration to JSON file"""
        config_path = Path(config_path)
        try:
            config_path.parent.mkdir(parents=True, exist_ok=True)
            with file_lock(config_path):
                atomic_write(config_path, json.dumps(self.to_dict(), indent=2, ensure_ascii=False))
            logger.info(f"Configuration saved to {config_path}")
        except Exception as e:
            logger.error(f"Error saving config to {config_path}: {e}")
            raise


def load_config(config_path: Optional[Path] = None) -> AppConfig:
    """Load configuration with fallback logic

    Priority (later wins):
    1. Defaults
    2. Provided config file path, else $HAZEORDER_CONFIG, else ./hazeorder.json
    3. Environment variables
    """
    if config_path is None and os.getenv('HAZEORDER_CONFIG'):
        config_path = Path(os.environ['HAZEORDER_CONFIG'])
    if config_path is None:
        config_path = Path("hazeorder.json")

    config = AppConfig.from_file(config_path) if config_path.exists() else AppConfig()

    # Override with environment variables
    env_config = AppConfig.from_env()
    defaults = AppConfig()
    for key in ('threads', 'full_rank', 'max_rank_samples', 'log_level', 'log_format'):
        env_value = getattr(env_config, key)
        if env_value != getattr(defaults, key):
            setattr(config, key, env_value)
    dehaze_updates = {
        f.name: getattr(env_config.dehaze, f.name)
        for f in fields(DehazeConfig)
        if getattr(env_config.dehaze, f.name) != getattr(defaults.dehaze, f.name)
    }
    if dehaze_updates:
        config.dehaze = replace(config.dehaze, **dehaze_updates)

    errors = config.validate()
    if errors:
        error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {error}" for error in errors)
        logger.error(error_msg)
        raise ConfigError(error_msg)

    logger.debug("Configuration loaded and validated successfully")
    return config


def setup_logging(config: AppConfig) -> None:
    """Setup logging based on configuration"""
    logging.basicConfig(
        level=getattr(logging, config.log_level.upper()),
        format=config.log_format,
        force=True  # Override any existing logging configuration
    )
    logger.debug(f"Logging configured at {config.log_level} level")
