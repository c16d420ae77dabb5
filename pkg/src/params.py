import os

import yaml

from .errors import ConfigError

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
DEFAULT_PARAMS_FILE = os.path.join(PROJECT_ROOT, 'config', 'parameters.yaml')
DEFAULT_GAIN_BANK_FILE = os.path.join(PROJECT_ROOT, 'config', 'gain_bank.yaml')


def _load_yaml(path):
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"Parameter file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Malformed YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Expected a mapping at the top of {path}")
    return data


def load_params(params_file=None):
    """Loads config/parameters.yaml (or an override) as a plain mapping."""
    return _load_yaml(params_file or DEFAULT_PARAMS_FILE)


def load_gain_bank(path=None):
    return _load_yaml(path or DEFAULT_GAIN_BANK_FILE)
