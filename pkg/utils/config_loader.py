"""
Configuration Loader
Loads and manages experiment configuration from experiment_config.json
"""
import os
import json
import copy
from typing import Dict, Any, List, Optional

REQUIRED_KEYS = ['defaults', 'distributions', 'experiments', 'execution_settings', 'logging']
EXPERIMENT_KINDS = ['ball', 'pointwise', 'max', 'noise', 'rate', 'inconsistency', 'cv']


class ConfigError(ValueError):
    """Raised for a malformed configuration file or block"""


class ConfigLoader:
    """
    Configuration loader for experiments
    Manages loading, validation, and access to the built-in defaults and
    merging of user configuration files and command-line overrides
    """

    def __init__(self, config_path: str = None):
        """
        Initialize configuration loader

        Args:
            config_path: Path to experiment_config.json
        """
        if config_path is None:
            current_dir = os.path.dirname(os.path.abspath(__file__))
            config_path = os.path.join(current_dir, '..', 'experiment_config.json')

        self.config_path = config_path
        self.config = {}
        self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """
        Load configuration from file

        Returns:
            Configuration dictionary
        """
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                self.config = json.load(f)
        except FileNotFoundError:
            raise FileNotFoundError(f"Configuration file not found: {self.config_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in configuration file: {e}")

        self._validate_config()
        return self.config

    def _validate_config(self):
        """Validate configuration structure"""
        for key in REQUIRED_KEYS:
            if key not in self.config:
                raise ConfigError(f"Missing required configuration key: {key}")

        if not isinstance(self.config['distributions'], dict):
            raise ConfigError("'distributions' must be a dictionary")
        for name, descriptor in self.config['distributions'].items():
            if not isinstance(descriptor, dict) or 'name' not in descriptor:
                raise ConfigError(f"Distribution '{name}' must be an object with a 'name'")

        if not isinstance(self.config['experiments'], dict):
            raise ConfigError("'experiments' must be a dictionary")
        for kind, block in self.config['experiments'].items():
            self._validate_experiment_config(kind, block)

    def _validate_experiment_config(self, kind: str, block: Dict[str, Any]):
        """
        Validate an individual experiment block

        Args:
            kind: Experiment kind
            block: Experiment configuration dictionary
        """
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"Unknown experiment kind '{kind}', expected one of {EXPERIMENT_KINDS}")
        if 'enabled' not in block:
            raise ConfigError(f"Experiment '{kind}' missing required key: enabled")

        n_grid = block.get('n_grid')
        if n_grid is not None:
            if not isinstance(n_grid, list) or not n_grid:
                raise ConfigError(f"Experiment '{kind}' n_grid must be a non-empty list")
            if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
                raise ConfigError(f"Experiment '{kind}' n_grid must be strictly increasing")

        if 'reps' in block and int(block['reps']) < 1:
            raise ConfigError(f"Experiment '{kind}' reps must be >= 1")

        distribution = block.get('distribution')
        if isinstance(distribution, str) and distribution not in self.config['distributions']:
            raise ConfigError(f"Experiment '{kind}' references unknown distribution '{distribution}'")

    def reload_config(self) -> Dict[str, Any]:
        """
        Reload configuration from file

        Returns:
            Updated configuration dictionary
        """
        return self.load_config()

    def get_config(self) -> Dict[str, Any]:
        return self.config

    def get_defaults(self) -> Dict[str, Any]:
        return self.config.get('defaults', {})

    def get_distribution(self, name: str) -> Dict[str, Any]:
        """
        Get a named distribution descriptor

        Raises:
            ConfigError: Unknown name
        """
        distributions = self.config.get('distributions', {})
        if name not in distributions:
            raise ConfigError(f"Unknown distribution '{name}', configured: {sorted(distributions)}")
        return copy.deepcopy(distributions[name])

    def get_all_experiments(self) -> Dict[str, Dict[str, Any]]:
        return self.config.get('experiments', {})

    def get_experiment_config(self, kind: str) -> Optional[Dict[str, Any]]:
        """
        Get configuration for a specific experiment kind

        Returns:
            Experiment block or None if not configured
        """
        return self.config.get('experiments', {}).get(kind)

    def get_enabled_experiments(self) -> List[str]:
        """List of enabled experiment kinds, in file order"""
        return [kind for kind, block in self.get_all_experiments().items() if block.get('enabled', False)]

    def get_execution_settings(self) -> Dict[str, Any]:
        return self.config.get('execution_settings', {})

    def get_workers(self) -> int:
        return int(self.get_execution_settings().get('workers', -1))

    def get_logging_config(self) -> Dict[str, Any]:
        return self.config.get('logging', {})

    def resolve_experiment(self, kind: str, user_config: Optional[Dict[str, Any]] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Merge configuration for one experiment run

        Precedence, lowest first: built-in defaults and execution settings, the
        built-in experiment block, the user file (its 'defaults' and
        'experiments.<kind>' blocks, or the whole file when it has no
        'experiments' key), then non-None overrides (command-line flags).

        Args:
            kind: Experiment kind
            user_config: Parsed --config file
            overrides: Flag values

        Returns:
            Flat dict accepted by ExperimentConfig.from_dict, with the
            distribution resolved to a descriptor
        """
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"Unknown experiment kind '{kind}'")

        resolved: Dict[str, Any] = {}
        resolved.update(self.get_defaults())
        resolved.update(self.get_execution_settings())
        resolved.update(self.get_experiment_config(kind) or {})

        distributions = dict(self.config.get('distributions', {}))
        if user_config:
            distributions.update(user_config.get('distributions', {}))
            if 'experiments' in user_config:
                resolved.update(user_config.get('defaults', {}))
                resolved.update(user_config['experiments'].get(kind, {}))
            else:
                resolved.update({key: value for key, value in user_config.items() if key != 'distributions'})

        for key, value in (overrides or {}).items():
            if value is not None:
                resolved[key] = value

        distribution = resolved.get('distribution')
        if isinstance(distribution, str):
            if distribution not in distributions:
                raise ConfigError(f"Unknown distribution '{distribution}'")
            resolved['distribution'] = copy.deepcopy(distributions[distribution])

        resolved.pop('enabled', None)
        resolved['kind'] = kind
        return resolved


def load_user_config(path: str) -> Dict[str, Any]:
    """
    Load a user --config JSON file

    Raises:
        FileNotFoundError: Missing file
        ConfigError: Invalid JSON or not an object
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return data


# Singleton instance
_config_instance = None


def get_config_loader(config_path: str = None) -> ConfigLoader:
    """
    Get singleton configuration loader instance

    Args:
        config_path: Path to experiment_config.json

    Returns:
        ConfigLoader instance
    """
    global _config_instance

    if _config_instance is None:
        _config_instance = ConfigLoader(config_path)

    return _config_instance


def reload_config():
    """Reload configuration from file"""
    global _config_instance

    if _config_instance is not None:
        _config_instance.reload_config()
