# core/managers/__init__.py
# ServiceManager imports every service, so it is imported from its module directly.

from .config_manager import ConfigManager, RunConfig

__all__ = [
    'ConfigManager',
    'RunConfig',
]
