"""structlog setup shared by the command line and library use."""

from __future__ import annotations

import logging
import sys
from typing import Any

import structlog


def _processors(renderer: Any) -> list[Any]:
    return [
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="ISO"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        renderer,
    ]


def configure_logging(level: str, log_format: str = "json") -> None:
    """Structured logging to stderr; artifacts never go through the log stream."""
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level.upper(), force=True)
    if log_format == "json":
        renderer = structlog.processors.JSONRenderer()
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=_processors(renderer),
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def configure_default_logging() -> None:
    """JSON records through stdlib logging, unless the application already configured structlog.

    Without handlers of its own, stdlib logging only emits warnings and errors, on stderr.
    """
    if structlog.is_configured():
        return
    structlog.configure(
        processors=_processors(structlog.processors.JSONRenderer()),
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )
