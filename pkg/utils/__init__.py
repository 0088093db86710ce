"""
SPDDSMBN Utilities Module

Hashing of resolved configurations and lock-guarded output directories.
"""

from .hashing import canonical_json, config_hash
from .output_dir import (
    prepare_output_dir, locked_output_dir,
    atomic_write_bytes, atomic_write_text, write_json
)

__all__ = [
    'canonical_json',
    'config_hash',
    'prepare_output_dir',
    'locked_output_dir',
    'atomic_write_bytes',
    'atomic_write_text',
    'write_json'
]
