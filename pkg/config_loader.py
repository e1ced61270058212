#!/usr/bin/env python3
"""
Configuration loader with validation and environment variable support
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from core_utils import ConfigError, ValidationError
from input_validation import InputValidator

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "config.yaml"

_DEFAULTS: Dict[str, Any] = {
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    },
    'runtime': {
        'seed': 20240101,
        'jobs': 1,
        'out_dir': '.'
    },
    'atpg': {
        'backtrack_limit': 10000,
        'fault_spec': 'hard:100'
    },
    'datagen': {
        'k_hard': 100,
        'folds': 5,
        'labeling': 'survival'
    },
    'hybnn': {
        'hidden_extractor': 32,
        'hidden_regressor': 16,
        'learning_rate': 0.01,
        'beta1': 0.9,
        'beta2': 0.999,
        'adam_epsilon': 1e-8,
        'epochs': 200,
        'batch_size': 256,
        'patience': 20,
        'validation_fraction': 0.1
    },
    'svr': {
        'C': 1.0,
        'epsilon': 0.1,
        'kernel': 'rbf',
        'gamma': 'scale',
        'tol': 1e-3,
        'max_iter': 200000,
        'max_samples': 3000
    },
    'meta': {
        'n_trees': 100,
        'max_features': 4,
        'min_samples_split': 2,
        'max_depth': None
    },
    'cross_validation': {
        'folds': 5
    }
}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass
class ConfigManager:
    """Centralized configuration management with validation"""

    config_path: Path = field(default_factory=lambda: Path(os.getenv('HYBMT_CONFIG', str(DEFAULT_CONFIG_PATH))))
    _config: Optional[Dict[str, Any]] = field(default=None, init=False)

    def __post_init__(self):
        self.config_path = Path(self.config_path)
        self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file with environment variable substitution"""
        if not self.config_path.exists():
            logger.warning(f"Config file {self.config_path} not found, using defaults")
            self._config = self._get_default_config()
            return self._config

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                raw_config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Failed to parse {self.config_path}: {e}") from e

        if not isinstance(raw_config, dict):
            raise ConfigError(f"{self.config_path} must contain a mapping at top level")

        config = _deep_merge(self._get_default_config(), self._substitute_env_vars(raw_config))
        self._validate_config(config)
        self._config = config
        logger.debug(f"Configuration loaded from {self.config_path}")
        return self._config

    def _substitute_env_vars(self, config: Any) -> Any:
        """Recursively substitute environment variables in config"""
        if isinstance(config, dict):
            return {k: self._substitute_env_vars(v) for k, v in config.items()}
        elif isinstance(config, list):
            return [self._substitute_env_vars(item) for item in config]
        elif isinstance(config, str) and config.startswith('${') and config.endswith('}'):
            env_var = config[2:-1]
            default_value = None

            if ':' in env_var:
                env_var, default_value = env_var.split(':', 1)

            return os.getenv(env_var, default_value)
        else:
            return config

    def _validate_config(self, config: Dict[str, Any]) -> None:
        """Validate configuration structure and values"""
        def positive_int(path: str) -> None:
            value = self._lookup(config, path)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{path} must be a positive integer, got {value!r}")

        def positive_float(path: str) -> None:
            value = self._lookup(config, path)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{path} must be a positive number, got {value!r}")

        for path in ('atpg.backtrack_limit', 'datagen.k_hard', 'runtime.jobs',
                     'hybnn.hidden_extractor', 'hybnn.hidden_regressor', 'hybnn.epochs',
                     'hybnn.batch_size', 'hybnn.patience', 'svr.max_iter', 'svr.max_samples',
                     'meta.n_trees', 'meta.max_features', 'meta.min_samples_split'):
            positive_int(path)

        for path in ('hybnn.learning_rate', 'hybnn.adam_epsilon', 'svr.C', 'svr.tol'):
            positive_float(path)

        for path in ('datagen.folds', 'cross_validation.folds'):
            positive_int(path)
            if self._lookup(config, path) < 2:
                raise ConfigError(f"{path} must be at least 2")

        if self._lookup(config, 'svr.kernel') not in ('rbf', 'linear'):
            raise ConfigError("svr.kernel must be 'rbf' or 'linear'")

        if self._lookup(config, 'datagen.labeling') not in ('survival', 'per-net'):
            raise ConfigError("datagen.labeling must be 'survival' or 'per-net'")

        try:
            InputValidator.validate_probability(self._lookup(config, 'hybnn.validation_fraction'),
                                                'hybnn.validation_fraction')
        except ValidationError as e:
            raise ConfigError(str(e)) from None

        epsilon = self._lookup(config, 'svr.epsilon')
        if not isinstance(epsilon, (int, float)) or epsilon < 0:
            raise ConfigError("svr.epsilon must be a non-negative number")

        logger.debug("Configuration validation passed")

    @staticmethod
    def _lookup(config: Dict[str, Any], key_path: str) -> Any:
        value: Any = config
        for key in key_path.split('.'):
            value = value[key]
        return value

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration"""
        return copy.deepcopy(_DEFAULTS)

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get configuration value using dot notation (e.g., 'atpg.backtrack_limit')"""
        if self._config is None:
            self.load_config()

        try:
            return self._lookup(self._config, key_path)  # type: ignore[arg-type]
        except (KeyError, TypeError):
            return default

    def get_section(self, section: str) -> Dict[str, Any]:
        """Get entire configuration section"""
        return dict(self.get(section, {}))

    def reload(self) -> None:
        """Reload configuration from file"""
        self.load_config()
        logger.info("Configuration reloaded")


# Global configuration instance (initialized lazily)
_config_manager: Optional[ConfigManager] = None


def get_config_manager(config_path: Optional[Path] = None) -> ConfigManager:
    """Get the global configuration manager, loading a new file if a path is given"""
    global _config_manager
    if config_path is not None:
        _config_manager = ConfigManager(config_path=Path(config_path))
    elif _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def get_config(key_path: str, default: Any = None) -> Any:
    """Get configuration value using dot notation"""
    return get_config_manager().get(key_path, default)


def get_section(section: str) -> Dict[str, Any]:
    """Get configuration section"""
    return get_config_manager().get_section(section)
