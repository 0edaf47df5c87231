"""RIS mutual coupling lab: coupling-aware radiation patterns, parameter fitting and rate analysis."""

from .logging_config import configure_default_logging

__version__ = "0.1.0"

configure_default_logging()
