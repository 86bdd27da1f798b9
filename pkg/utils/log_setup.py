"""Structured logging for the CLI and long runs.

Verbosity comes from ``MCAST_POS_LOG``:

``quiet``       warnings and errors only
``moves``       one line per applied move (``mcast.moves``)
``assertions``  moves plus every runtime check (``mcast.assertions``)
``full``        everything at DEBUG
"""

from __future__ import annotations

import json
import logging
import os
from typing import Optional

MOVES_LOGGER = "mcast.moves"
ASSERTIONS_LOGGER = "mcast.assertions"
LOG_ENV_VAR = "MCAST_POS_LOG"
LOG_LEVELS = ("quiet", "moves", "assertions", "full")

logger = logging.getLogger(__name__)


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        log_record = {
            "time": self.formatTime(record),
            "level": record.levelname,
            "name": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            log_record["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(log_record)


def configure_logging(verbosity: Optional[str] = None) -> str:
    """Install the JSON handler on the root logger and apply ``verbosity``.

    Returns the verbosity that was actually applied.
    """
    requested = (verbosity or os.getenv(LOG_ENV_VAR, "quiet")).strip().lower()
    applied = requested if requested in LOG_LEVELS else "quiet"

    handler = logging.StreamHandler()
    handler.setFormatter(JsonFormatter())
    root_logger = logging.getLogger()
    root_logger.handlers = [handler]

    root_logger.setLevel(logging.DEBUG if applied == "full" else logging.WARNING)
    moves_level = logging.INFO if applied in ("moves", "assertions") else logging.NOTSET
    assertions_level = logging.INFO if applied == "assertions" else logging.NOTSET
    logging.getLogger(MOVES_LOGGER).setLevel(moves_level)
    logging.getLogger(ASSERTIONS_LOGGER).setLevel(assertions_level)

    if applied != requested:
        logger.warning("Unknown %s value %r, falling back to quiet", LOG_ENV_VAR, requested)
    return applied


__all__ = [
    "ASSERTIONS_LOGGER",
    "JsonFormatter",
    "LOG_ENV_VAR",
    "LOG_LEVELS",
    "MOVES_LOGGER",
    "configure_logging",
]
