#!/usr/bin/env python3
"""
Canonical JSON and configuration hashing.
"""

import hashlib
import json
from typing import Any


def canonical_json(obj: Any) -> str:
    """Sorted-key, whitespace-free JSON"""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(obj: Any) -> str:
    """First 16 hex characters of SHA-256 over the canonical JSON"""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]
