#!/usr/bin/env python3
"""
Console output helpers.

All user-facing progress output goes through these functions so that the
SPDDSMBN_LOG_LEVEL setting applies everywhere. Lines carry the same upper-case
prefixes used across the CLI (INFO:, WARNING:, ERROR:, SUCCESS:, DEBUG:).
"""

import sys

from .config import config, LOG_LEVELS


def _enabled(level: str) -> bool:
    return LOG_LEVELS.index(level) >= LOG_LEVELS.index(config.log_level)


def debug(message: str):
    if _enabled("debug"):
        print(f"DEBUG: {message}")


def info(message: str):
    if _enabled("info"):
        print(f"INFO: {message}")


def success(message: str):
    if _enabled("info"):
        print(f"SUCCESS: {message}")


def warning(message: str):
    if _enabled("warning"):
        print(f"WARNING: {message}", file=sys.stderr)


def error(message: str):
    print(f"ERROR: {message}", file=sys.stderr)


def rule(title: str = "", width: int = 60):
    """Print a section separator"""
    if not _enabled("info"):
        return
    print("=" * width)
    if title:
        print(title)
        print("=" * width)
