#!/usr/bin/env python3
"""
Configuration Module for SPDDSMBN

This module handles loading and managing process-level configuration from
environment variables (and an optional .env file) with sensible defaults.
Run-level experiment settings live in src/run_config.py.
"""

import os
from dotenv import load_dotenv
from typing import Optional


LOG_LEVELS = ("debug", "info", "warning", "error")
EIG_SOLVERS = ("lapack", "jacobi")


class Config:
    """Configuration manager for SPDDSMBN"""

    DEFAULT_OUTPUT_DIR = "runs"
    LOCK_FILE_NAME = ".spddsmbn.lock"
    VERSION = "spddsmbn 0.3.0"

    def __init__(self):
        # Load environment variables from .env file if it exists
        load_dotenv()

        # Cache loaded values
        self._log_level: Optional[str] = None
        self._eig_solver: Optional[str] = None
        self._threads: Optional[int] = None

    def reload(self):
        """Drop cached values so the next access re-reads the environment"""
        self._log_level = None
        self._eig_solver = None
        self._threads = None

    @property
    def output_path(self) -> str:
        """Get the default root directory for run artifacts"""
        return os.path.abspath(os.getenv('SPDDSMBN_OUTPUT_DIR', self.DEFAULT_OUTPUT_DIR))

    @property
    def log_level(self) -> str:
        """Get the console verbosity"""
        if self._log_level is None:
            value = os.getenv('SPDDSMBN_LOG_LEVEL', 'info').strip().lower()
            if value not in LOG_LEVELS:
                print(f"WARNING: Invalid SPDDSMBN_LOG_LEVEL value '{value}', using 'info'")
                value = 'info'
            self._log_level = value
        return self._log_level

    @log_level.setter
    def log_level(self, value: str):
        if value not in LOG_LEVELS:
            raise ValueError(f"Unknown log level: {value}. Valid levels: {', '.join(LOG_LEVELS)}")
        self._log_level = value

    @property
    def eig_solver(self) -> str:
        """Get the symmetric eigensolver backend ('lapack' or 'jacobi')"""
        if self._eig_solver is None:
            value = os.getenv('SPDDSMBN_EIG_SOLVER', 'lapack').strip().lower()
            if value not in EIG_SOLVERS:
                print(f"WARNING: Invalid SPDDSMBN_EIG_SOLVER value '{value}', using 'lapack'")
                value = 'lapack'
            self._eig_solver = value
        return self._eig_solver

    @eig_solver.setter
    def eig_solver(self, value: str):
        if value not in EIG_SOLVERS:
            raise ValueError(f"Unknown eigensolver: {value}. Valid solvers: {', '.join(EIG_SOLVERS)}")
        self._eig_solver = value

    @property
    def threads(self) -> int:
        """Get the default number of BLAS threads"""
        if self._threads is None:
            try:
                self._threads = int(os.getenv('SPDDSMBN_THREADS', '1'))

                # Validate reasonable bounds
                if self._threads < 1:
                    print(f"WARNING: SPDDSMBN_THREADS ({self._threads}) is too low, using 1")
                    self._threads = 1
                elif self._threads > 256:
                    print(f"WARNING: SPDDSMBN_THREADS ({self._threads}) is very high, using 256")
                    self._threads = 256

            except ValueError:
                print(f"WARNING: Invalid SPDDSMBN_THREADS value '{os.getenv('SPDDSMBN_THREADS')}', using 1")
                self._threads = 1

        return self._threads

    def print_config_summary(self):
        """Print a summary of the current configuration"""
        print("Configuration Summary:")
        print(f"  Version: {self.VERSION}")
        print(f"  Log Level: {self.log_level}")
        print(f"  Eigensolver: {self.eig_solver}")
        print(f"  BLAS Threads: {self.threads}")
        print(f"  Output Root: {self.output_path}")


# Global configuration instance
config = Config()
