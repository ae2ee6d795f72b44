"""
Configuration Management for the Affine Schottky Toolkit
Handles loading, validation, environment overrides and lookup of run settings.
"""

import copy
import json
import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from .errors import SpecValidationError

logger = logging.getLogger("ConfigurationManager")

ENV_CONFIG_PATH = "AFFINE_SCHOTTKY_CONFIG"
ENV_SEED = "AFFINE_SCHOTTKY_SEED"
ENV_LOG_LEVEL = "AFFINE_SCHOTTKY_LOG_LEVEL"

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class ConfigurationManager:
    """
    Manages configuration for certification, tracing and export runs.
    Settings come from DEFAULT_CONFIG, then the JSON file, then the environment.
    """

    DEFAULT_CONFIG = {
        "tolerances": {
            "rank": 1e-8,
            "band": 1e-6,
            "boundary": 1e-7,
            "min_rho_gap": 1e-4
        },
        "sampling": {
            "seed": 0,
            "sphere_samples": 10000,
            "domain_samples": 1000,
            "lipschitz_pairs": 100000,
            "gap_rays": 64
        },
        "audit": {
            "max_word_length": 6
        },
        "tracing": {
            "max_steps": 60,
            "random_points": 1000,
            "radius_factor": 10.0
        },
        "logging": {
            "level": "INFO",
            "directory": "logs"
        },
        "output": {
            "report": "report.json",
            "traces": "traces.csv",
            "export_dir": "exports"
        }
    }

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration manager.

        Args:
            config_path: Path to a JSON configuration file. Falls back to
                $AFFINE_SCHOTTKY_CONFIG, then to config.json.
        """
        load_dotenv()
        self.config_path = config_path or os.getenv(ENV_CONFIG_PATH, "config.json")
        self.config: Dict[str, Any] = {}
        self.logger = logging.getLogger("ConfigurationManager")

    def load_config(self, log_settings: bool = True) -> Dict[str, Any]:
        """
        Load configuration from file and environment.
        A missing file means the defaults.

        Args:
            log_settings: Log the effective settings once loaded

        Returns:
            Configuration dictionary

        Raises:
            SpecValidationError: If the file is not valid JSON or validation fails
        """
        file_config: Dict[str, Any] = {}
        if not os.path.exists(self.config_path):
            self.logger.info(
                f"No configuration file at {self.config_path}, using defaults"
            )
        else:
            try:
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    file_config = json.load(f)
                self.logger.info(
                    f"Configuration loaded from {self.config_path}"
                )
            except json.JSONDecodeError as e:
                self.logger.error(
                    f"Invalid JSON in configuration file: {e}"
                )
                raise SpecValidationError(f"invalid JSON in {self.config_path}: {e}") from e
            if not isinstance(file_config, dict):
                raise SpecValidationError(
                    f"configuration root must be an object, got {type(file_config).__name__}"
                )

        self.config = deep_merge(self.DEFAULT_CONFIG, file_config)
        self._apply_environment()

        if not self.validate_config(self.config):
            raise SpecValidationError(
                "Configuration validation failed. "
                "Please check the error messages above."
            )

        if log_settings:
            self.log_configuration()
        return self.config

    def _apply_environment(self) -> None:
        """Environment variables override the file."""
        seed = os.getenv(ENV_SEED)
        if seed is not None:
            try:
                self.config["sampling"]["seed"] = int(seed)
            except ValueError as e:
                raise SpecValidationError(f"{ENV_SEED} must be an integer, got {seed!r}") from e
            self.logger.debug(f"Seed overridden from environment: {seed}")

        level = os.getenv(ENV_LOG_LEVEL)
        if level is not None:
            self.config["logging"]["level"] = level.upper()
            self.logger.debug(f"Log level overridden from environment: {level}")

    def validate_config(self, config: Dict[str, Any]) -> bool:
        """
        Validate configuration structure and values.

        Args:
            config: Configuration dictionary to validate

        Returns:
            True if valid, False otherwise
        """
        is_valid = True

        required_keys = [
            "tolerances",
            "sampling",
            "audit",
            "tracing",
            "logging",
            "output"
        ]

        for key in required_keys:
            if key not in config:
                self.logger.error(f"Missing required configuration section: '{key}'")
                is_valid = False

        if not is_valid:
            return False

        is_valid &= self._validate_tolerances(config.get("tolerances", {}))
        is_valid &= self._validate_sampling(config.get("sampling", {}))
        is_valid &= self._validate_audit(config.get("audit", {}))
        is_valid &= self._validate_tracing(config.get("tracing", {}))
        is_valid &= self._validate_logging(config.get("logging", {}))
        is_valid &= self._validate_output(config.get("output", {}))

        return is_valid

    def _check_fields(self, section_name: str, section: Dict[str, Any], required_fields: Dict[str, Any]) -> bool:
        """Presence and type of every required field of a section."""
        if not isinstance(section, dict):
            self.logger.error(f"Section '{section_name}' must be an object")
            return False

        is_valid = True
        for field, expected_type in required_fields.items():
            if field not in section:
                self.logger.error(
                    f"Missing required field in {section_name}: '{field}'"
                )
                is_valid = False
                continue
            value = section[field]
            # bool is an int subclass
            if isinstance(value, bool) and expected_type is not bool:
                type_ok = False
            else:
                type_ok = isinstance(value, expected_type)
            if not type_ok:
                type_name = (
                    expected_type.__name__ if isinstance(expected_type, type)
                    else " or ".join(t.__name__ for t in expected_type)
                )
                self.logger.error(
                    f"Invalid type for {section_name}.{field}: "
                    f"expected {type_name}, got {type(value).__name__}"
                )
                is_valid = False
        return is_valid

    def _validate_tolerances(self, section: Dict[str, Any]) -> bool:
        """Validate numerical tolerances."""
        required_fields = {
            "rank": (int, float),
            "band": (int, float),
            "boundary": (int, float),
            "min_rho_gap": (int, float)
        }
        if not self._check_fields("tolerances", section, required_fields):
            return False

        is_valid = True
        for field in required_fields:
            value = section[field]
            if not 0 < value < 1:
                self.logger.error(
                    f"tolerances.{field} must be in (0, 1), got {value}"
                )
                is_valid = False
        return is_valid

    def _validate_sampling(self, section: Dict[str, Any]) -> bool:
        """Validate seed and sample counts."""
        required_fields = {
            "seed": int,
            "sphere_samples": int,
            "domain_samples": int,
            "lipschitz_pairs": int,
            "gap_rays": int
        }
        if not self._check_fields("sampling", section, required_fields):
            return False

        is_valid = True
        if section["seed"] < 0:
            self.logger.error(f"sampling.seed must be >= 0, got {section['seed']}")
            is_valid = False
        for field in ("sphere_samples", "domain_samples", "lipschitz_pairs"):
            if section[field] < 100:
                self.logger.error(
                    f"sampling.{field} must be at least 100, got {section[field]}"
                )
                is_valid = False
        if section["gap_rays"] < 1:
            self.logger.error(f"sampling.gap_rays must be positive, got {section['gap_rays']}")
            is_valid = False
        return is_valid

    def _validate_audit(self, section: Dict[str, Any]) -> bool:
        """Validate product audit settings."""
        if not self._check_fields("audit", section, {"max_word_length": int}):
            return False

        max_len = section["max_word_length"]
        if max_len < 1 or max_len > 12:
            self.logger.error(
                f"audit.max_word_length must be between 1 and 12, got {max_len}"
            )
            return False
        return True

    def _validate_tracing(self, section: Dict[str, Any]) -> bool:
        """Validate tracing settings."""
        required_fields = {
            "max_steps": int,
            "random_points": int,
            "radius_factor": (int, float)
        }
        if not self._check_fields("tracing", section, required_fields):
            return False

        is_valid = True
        if section["max_steps"] < 1:
            self.logger.error(f"tracing.max_steps must be positive, got {section['max_steps']}")
            is_valid = False
        if section["random_points"] < 1:
            self.logger.error(f"tracing.random_points must be positive, got {section['random_points']}")
            is_valid = False
        if section["radius_factor"] <= 0:
            self.logger.error(f"tracing.radius_factor must be positive, got {section['radius_factor']}")
            is_valid = False
        return is_valid

    def _validate_logging(self, section: Dict[str, Any]) -> bool:
        """Validate logging settings."""
        if not self._check_fields("logging", section, {"level": str, "directory": str}):
            return False

        if section["level"].upper() not in LOG_LEVELS:
            self.logger.error(
                f"Invalid log level: {section['level']}. "
                f"Must be one of {LOG_LEVELS}"
            )
            return False
        return True

    def _validate_output(self, section: Dict[str, Any]) -> bool:
        """Validate output paths."""
        required_fields = {
            "report": str,
            "traces": str,
            "export_dir": str
        }
        if not self._check_fields("output", section, required_fields):
            return False

        is_valid = True
        for field in required_fields:
            if not section[field].strip():
                self.logger.error(f"output.{field} must not be empty")
                is_valid = False
        return is_valid

    def get_setting(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration setting by key path.

        Args:
            key: Dot-separated key path (e.g., "sampling.seed")
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        keys = key.split('.')
        value = self.config

        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            self.logger.debug(
                f"Configuration key '{key}' not found, using default: {default}"
            )
            return default

    def log_configuration(self) -> None:
        """Log loaded configuration settings for confirmation."""
        self.logger.info("=" * 70)
        self.logger.info("CONFIGURATION LOADED")
        self.logger.info("=" * 70)

        tolerances = self.config.get("tolerances", {})
        self.logger.info("Tolerances:")
        self.logger.info(f"  Rank: {tolerances.get('rank')}")
        self.logger.info(f"  Modulus band: {tolerances.get('band')}")
        self.logger.info(f"  Boundary: {tolerances.get('boundary')}")
        self.logger.info(f"  Min rho gap: {tolerances.get('min_rho_gap')}")

        sampling = self.config.get("sampling", {})
        self.logger.info("Sampling:")
        self.logger.info(f"  Seed: {sampling.get('seed')}")
        self.logger.info(f"  Sphere samples: {sampling.get('sphere_samples')}")
        self.logger.info(f"  Domain samples: {sampling.get('domain_samples')}")
        self.logger.info(f"  Lipschitz pairs: {sampling.get('lipschitz_pairs')}")
        self.logger.info(f"  Gap rays: {sampling.get('gap_rays')}")

        self.logger.info(f"Audit: max word length {self.get_setting('audit.max_word_length')}")

        tracing = self.config.get("tracing", {})
        self.logger.info("Tracing:")
        self.logger.info(f"  Max steps: {tracing.get('max_steps')}")
        self.logger.info(f"  Random points: {tracing.get('random_points')}")
        self.logger.info(f"  Radius factor: {tracing.get('radius_factor')}")

        output = self.config.get("output", {})
        self.logger.info("Output:")
        self.logger.info(f"  Report: {output.get('report')}")
        self.logger.info(f"  Traces: {output.get('traces')}")
        self.logger.info(f"  Export directory: {output.get('export_dir')}")

        self.logger.info("=" * 70)


def create_example_config(output_path: str = "config.example.json") -> None:
    """
    Write the defaults with inline documentation keys.

    Args:
        output_path: Path where to save the example config
    """
    example_config = {
        "_comment": "Affine Schottky toolkit configuration",
        "_description": "Every key is optional; missing keys take the defaults below",
        "tolerances": {
            **ConfigurationManager.DEFAULT_CONFIG["tolerances"],
            "_description": "rank: numerical rank cutoff; band: modulus band around 1; "
                            "boundary: cone boundary band; min_rho_gap: required 1 - rho(g_<)"
        },
        "sampling": {
            **ConfigurationManager.DEFAULT_CONFIG["sampling"],
            "_description": "All sampled verdicts derive their randomness from seed"
        },
        "audit": {
            **ConfigurationManager.DEFAULT_CONFIG["audit"],
            "_description": "Longest cyclically reduced word checked by the product audit"
        },
        "tracing": {
            **ConfigurationManager.DEFAULT_CONFIG["tracing"],
            "_description": "Random points are drawn in the ball of radius radius_factor * |t|"
        },
        "logging": {
            **ConfigurationManager.DEFAULT_CONFIG["logging"],
            "_description": "Level: DEBUG, INFO, WARNING, ERROR, CRITICAL"
        },
        "output": {
            **ConfigurationManager.DEFAULT_CONFIG["output"],
            "_description": "Default output file names"
        }
    }

    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(example_config, f, indent=2)
    logger.info(f"Example configuration created at {output_path}")
