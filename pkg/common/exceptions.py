#!/usr/bin/env python3
"""
Custom Exception Classes for SPDDSMBN

This module defines the exceptions used throughout the codebase. Every exception
carries the process exit code the CLI should report for it and a user-friendly
explanation for the console.
"""

from enum import IntEnum
from typing import Any, Dict, Optional


class ExitCode(IntEnum):
    """Process exit codes of the command-line interface"""
    SUCCESS = 0
    FAILURE = 1
    INVALID_CONFIG = 2
    MISSING_FILE = 3
    FORMAT_MISMATCH = 4
    NUMERIC = 5
    OUTPUT_LOCKED = 6
    INTERRUPTED = 130


class SpdDsmbnException(Exception):
    """Base exception class for all SPDDSMBN-related errors"""

    exit_code: ExitCode = ExitCode.FAILURE

    def get_user_friendly_message(self) -> str:
        """Get a user-friendly explanation of the error"""
        return str(self)


class InvalidInputError(SpdDsmbnException, ValueError):
    """Exception raised when an operation receives arguments outside its domain"""

    exit_code = ExitCode.INVALID_CONFIG


class SpdDomainError(InvalidInputError):
    """Exception raised when a matrix function needs an SPD input and did not get one"""

    def __init__(self, function_name: str, smallest_eigenvalue: float, message: str = None):
        self.function_name = function_name
        self.smallest_eigenvalue = float(smallest_eigenvalue)

        if message is None:
            message = (f"{function_name} requires a symmetric positive definite input, "
                       f"but the smallest eigenvalue is {self.smallest_eigenvalue:.6g}")

        super().__init__(message)


class InvalidBatchError(InvalidInputError):
    """Exception raised when a training batch cannot be normalized domain by domain"""

    def __init__(self, domain_id: int, count: int, message: str = None):
        self.domain_id = domain_id
        self.count = count

        if message is None:
            message = (f"Domain {domain_id} contributes {count} observation(s) to a training batch; "
                       f"at least 2 are required to estimate its Frechet variance")

        super().__init__(message)


class ConfigError(SpdDsmbnException, ValueError):
    """Exception raised for invalid run, generator or model configuration"""

    exit_code = ExitCode.INVALID_CONFIG

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)

    @classmethod
    def from_validation_error(cls, error: Any, section: Optional[str] = None) -> 'ConfigError':
        """Convert a pydantic ValidationError into a field-level ConfigError"""
        lines = []
        first_field = None
        for item in error.errors():
            location = ".".join(str(part) for part in item.get("loc", ()))
            if section:
                location = f"{section}.{location}" if location else section
            first_field = first_field or location
            lines.append(f"{location}: {item.get('msg', 'invalid value')}")
        exc = cls("; ".join(lines) or str(error))
        exc.field = first_field
        return exc


class UsageError(SpdDsmbnException, RuntimeError):
    """Exception raised when an API is called out of order (e.g. backward before forward)"""

    exit_code = ExitCode.FAILURE


class ModelStateError(SpdDsmbnException, RuntimeError):
    """Exception raised when model parameters leave their constraint set"""

    exit_code = ExitCode.NUMERIC

    def __init__(self, parameter: str, deviation: float, message: str = None):
        self.parameter = parameter
        self.deviation = float(deviation)

        if message is None:
            message = (f"Parameter '{parameter}' left the Stiefel manifold: "
                       f"||W^T W - I||_F = {self.deviation:.3g}")

        super().__init__(message)


class NumericError(SpdDsmbnException, ArithmeticError):
    """Exception raised for non-finite values or numerically invalid intermediates"""

    exit_code = ExitCode.NUMERIC

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        self.context = context or {}
        if self.context:
            details = ", ".join(f"{key}={value}" for key, value in self.context.items())
            message = f"{message} ({details})"
        super().__init__(message)


class NonFiniteGradientError(NumericError):
    """Exception raised when the optimizer receives NaN or infinite gradients"""

    def __init__(self, parameter: str, step: int):
        self.parameter = parameter
        self.step = step
        super().__init__("Non-finite gradient, optimizer step aborted",
                         {"parameter": parameter, "step": step})


class TrainingDivergedError(NumericError):
    """Exception raised when the training loss becomes non-finite"""

    def __init__(self, epoch: int, batch_index: int, last_good_state: Optional[Dict[str, Any]] = None):
        self.epoch = epoch
        self.batch_index = batch_index
        self.last_good_state = last_good_state
        super().__init__("Training loss became non-finite",
                         {"epoch": epoch, "batch": batch_index})

    def get_user_friendly_message(self) -> str:
        """Get a user-friendly explanation of the divergence"""
        return f"""DIVERGED: training stopped at epoch {self.epoch}, batch {self.batch_index}.
The loss became NaN or infinite. The last good model state was kept.

You can try:
  • Lowering the learning rate in the protocol section
  • Increasing the normalization eps
  • Checking the dataset for degenerate (constant) channels
"""


class MissingFileError(SpdDsmbnException, FileNotFoundError):
    """Exception raised when an input file or directory does not exist"""

    exit_code = ExitCode.MISSING_FILE

    def __init__(self, path: str, what: str = "file"):
        self.path = str(path)
        self.what = what
        super().__init__(f"Required {what} not found: {self.path}")


class FormatError(SpdDsmbnException, ValueError):
    """Exception raised when an on-disk artifact does not match its declared format"""

    exit_code = ExitCode.FORMAT_MISMATCH

    def __init__(self, path: str, field: str, message: str):
        self.path = str(path)
        self.field = field
        super().__init__(f"{self.path} [{field}]: {message}")


class OutputLockedError(SpdDsmbnException, RuntimeError):
    """Exception raised when another process is writing the same output directory"""

    exit_code = ExitCode.OUTPUT_LOCKED

    def __init__(self, directory: str, lock_path: str):
        self.directory = str(directory)
        self.lock_path = str(lock_path)
        super().__init__(f"Output directory {self.directory} is locked by another run ({self.lock_path})")

    def get_user_friendly_message(self) -> str:
        """Get a user-friendly explanation of the lock conflict"""
        return f"""LOCKED: {self.directory} is being written by another process.
If no other run is active, remove the stale lock file:
  {self.lock_path}
"""


class GradientCheckFailure(SpdDsmbnException, AssertionError):
    """Exception raised when a backward pass disagrees with finite differences"""

    exit_code = ExitCode.FAILURE

    def __init__(self, failures: Dict[str, float]):
        self.failures = dict(failures)
        listing = ", ".join(f"{name} ({err:.2e})" for name, err in self.failures.items())
        super().__init__(f"Gradient check failed for: {listing}")
