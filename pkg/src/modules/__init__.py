"""
Core modules for the Fractional Orlicz Lab.
"""

from .artifact_manager import ArtifactManager
from .config_manager import ConfigManager, RunConfig
from .experiment_runner import ExperimentOutcome, ExperimentRunner
from .field_handler import FieldHandler
from .state_manager import RunStateManager

__all__ = [
    "ArtifactManager",
    "ConfigManager",
    "RunConfig",
    "ExperimentOutcome",
    "ExperimentRunner",
    "FieldHandler",
    "RunStateManager",
]
