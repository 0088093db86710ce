#!/usr/bin/env python3
"""
Output directory preparation and locking.

Every command that writes artifacts holds an exclusive lock file inside its
output directory for the duration of the write, so two runs can never write
into the same directory at the same time. Files are written through a
temporary name and renamed into place.
"""

import json
import os
from contextlib import contextmanager
from typing import Any, Iterator, Optional

from common import console
from common.config import config
from common.exceptions import OutputLockedError


def prepare_output_dir(path: Optional[str], default_name: str) -> str:
    """Resolve the output directory (default: <output root>/<default_name>) and create it"""
    if not path:
        path = os.path.join(config.output_path, default_name)
    path = os.path.abspath(path)
    os.makedirs(path, exist_ok=True)
    return path


@contextmanager
def locked_output_dir(path: str) -> Iterator[str]:
    """Hold the directory's lock file while the body runs"""
    os.makedirs(path, exist_ok=True)
    lock_path = os.path.join(path, config.LOCK_FILE_NAME)
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLockedError(path, lock_path)

    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        console.debug(f"Acquired output lock {lock_path}")
        yield path
    finally:
        try:
            os.remove(lock_path)
        except FileNotFoundError:
            pass


def atomic_write_bytes(path: str, data: bytes):
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as fh:
        fh.write(data)
    os.replace(tmp_path, path)


def atomic_write_text(path: str, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str, obj: Any):
    """Pretty, sorted-key UTF-8 JSON written atomically"""
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
