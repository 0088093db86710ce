"""
Common utilities and shared modules for SPDDSMBN
"""

from .config import config, Config
from .exceptions import (
    ExitCode,
    SpdDsmbnException,
    InvalidInputError,
    SpdDomainError,
    InvalidBatchError,
    ConfigError,
    UsageError,
    ModelStateError,
    NumericError,
    NonFiniteGradientError,
    TrainingDivergedError,
    MissingFileError,
    FormatError,
    OutputLockedError,
    GradientCheckFailure
)

__all__ = [
    'config',
    'Config',
    'ExitCode',
    'SpdDsmbnException',
    'InvalidInputError',
    'SpdDomainError',
    'InvalidBatchError',
    'ConfigError',
    'UsageError',
    'ModelStateError',
    'NumericError',
    'NonFiniteGradientError',
    'TrainingDivergedError',
    'MissingFileError',
    'FormatError',
    'OutputLockedError',
    'GradientCheckFailure'
]
