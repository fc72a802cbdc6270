"""Cooperative contextual bandits for decentralized online stream classification."""

from .config import RunConfig, build_config, load_config
from .errors import ConfigurationError, InvariantViolation
from .simulation import RunResult, Simulation, run

__all__ = ["RunConfig", "build_config", "load_config", "ConfigurationError", "InvariantViolation",
           "RunResult", "Simulation", "run"]
__version__ = "0.1.0"
