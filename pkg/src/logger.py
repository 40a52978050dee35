"""Logging for momplan stages. Everything goes to stderr so JSON on stdout stays parseable."""

from __future__ import annotations

import logging
import os
import sys

from src.config import APP_NAME

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logging() -> logging.Logger:
    """Configure the stderr handler and return the momplan logger."""
    level = logging.DEBUG if os.environ.get("MOMPLAN_DEBUG") == "true" else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S", stream=sys.stderr)
    return logging.getLogger(APP_NAME)


def set_verbosity(quiet: bool = False, verbose: bool = False) -> None:
    """--verbose shows per-iteration solver traces, --quiet keeps warnings only."""
    if verbose:
        logger.setLevel(logging.DEBUG)
    elif quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.NOTSET)


logger = setup_logging()
