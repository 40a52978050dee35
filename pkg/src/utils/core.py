"""Run naming, hashing and timing helpers."""

from __future__ import annotations

import hashlib
import re
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator


def now_iso() -> str:
    """Return current UTC time in ISO format."""
    return datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + "Z"


def sanitize_run_name(name: str) -> str:
    """Clean up a scenario name for use as a run directory. Prevent path traversal."""
    name = str(name) if name is not None else ""
    if not name:
        return "unnamed"
    # Remove any path components
    name = name.replace('/', '_').replace('\\', '_').replace('..', '_')
    # Only allow safe characters
    name = re.sub(r'[^a-zA-Z0-9.\-_\s]', '', name)
    name = name.strip().replace(" ", "_")
    return name.strip(".") or "unnamed"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_sha256(path: Path, chunk_size: int = 1 << 16) -> str:
    """Hex digest of a file, read in chunks."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


@contextmanager
def stopwatch(timings: dict, key: str) -> Iterator[None]:
    """Record wall-clock seconds of the block under timings[key]."""
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = round(time.perf_counter() - start, 6)
