"""Decentralized collision-avoidance control on SE(3) with online GP learning."""

__version__ = "0.1.0"

from . import control, engine, gp, navigation, scenario, se3  # noqa: F401
from .errors import (  # noqa: F401
    BranchCutError,
    CapacityError,
    ConfigError,
    DegenerateConfigurationError,
    DegenerateConfigurationWarning,
    IllConditionedGramError,
    InsufficientDataError,
    IntegrationDivergedError,
)
