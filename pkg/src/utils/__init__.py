"""Utility functions for documents, hashing and figures."""

from src.utils.core import (
    file_sha256,
    now_iso,
    sanitize_run_name,
    sha256_bytes,
    stopwatch,
)
from src.utils.documents import (
    dump_yaml,
    load_yaml,
    read_csv,
    read_yaml,
    write_csv,
    write_yaml,
)
from src.utils.manifest import RunManifest

__all__ = [
    # core
    "file_sha256",
    "now_iso",
    "sanitize_run_name",
    "sha256_bytes",
    "stopwatch",
    # documents
    "dump_yaml",
    "load_yaml",
    "read_csv",
    "read_yaml",
    "write_csv",
    "write_yaml",
    # manifest
    "RunManifest",
]
