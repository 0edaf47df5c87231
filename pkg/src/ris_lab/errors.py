"""Exception types raised by the library and their CLI exit codes."""

from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DATA = 4


class RisLabError(Exception):
    """Base class for all library errors."""

    exit_code = EXIT_NUMERICAL


class InvalidArgumentError(RisLabError, ValueError):
    """An argument violates an operation's precondition."""


class ConditioningError(RisLabError):
    """A linear system is singular or too ill-conditioned to solve."""

    def __init__(self, operation: str, condition: float) -> None:
        self.operation = operation
        self.condition = condition
        super().__init__(f"{operation}: singular system (condition estimate {condition:.3e})")


class AccuracyError(RisLabError):
    """Numerical integration did not converge."""


class DegeneratePatternError(RisLabError):
    """A radiation pattern is identically zero and cannot be normalized."""


class SideLobeNotFoundError(RisLabError):
    """The pattern has no side lobe outside the main lobe."""


class DegenerateCellError(RisLabError):
    """ON and OFF unit-cell phases coincide, so 1-bit quantization is undefined."""


class ConfigError(RisLabError):
    """Scenario configuration is missing a value or holds an invalid one."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class DataParseError(RisLabError):
    """An input data file could not be parsed."""

    exit_code = EXIT_DATA

    def __init__(self, path: Path | str, line: int | None, message: str) -> None:
        self.path = Path(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{where}: {message}")


class InvalidDataError(RisLabError):
    """Input data parsed but breaks an invariant (e.g. non-monotone grid)."""

    exit_code = EXIT_DATA


class DegenerateDataError(InvalidDataError):
    """Input data carries no information (e.g. all samples equal)."""
