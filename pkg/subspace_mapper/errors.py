"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class SubspaceMapperError(Exception):
    """Base class for all expected failures"""

    exit_code = 1


class ParseError(SubspaceMapperError):
    """Malformed input file"""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigurationError(SubspaceMapperError):
    exit_code = 2


class CouplingError(SubspaceMapperError):
    """Coupling graph cannot connect an active set"""

    exit_code = 2


class MissingTableError(SubspaceMapperError):
    """Probability table absent or of the wrong length"""

    exit_code = 2


class InfeasibleConstraintError(SubspaceMapperError):
    exit_code = 3

    def __init__(self, detail: str = ""):
        message = "empty valid subspace"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class ToleranceError(SubspaceMapperError):
    """A numerical check exceeded its tolerance"""

    exit_code = 4


class DimensionCapError(SubspaceMapperError):
    """Problem too large for a dense (or sparse) computation"""

    exit_code = 4


def validation_message(exc: ValueError) -> str:
    """First human-readable reason of a pydantic ValidationError (or any ValueError)"""
    errors = getattr(exc, "errors", None)
    if callable(errors):
        details = errors()
        if details:
            return str(details[0].get("msg", exc)).removeprefix("Value error, ")
    return str(exc)
