"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class TomographyError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(TomographyError, ValueError):
    """Invalid argument, dimension mismatch, or malformed file."""

    exit_code = 2


class FormatError(InputError):
    """A text file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class GenerationError(TomographyError):
    """Random state generation gave up (retry limit reached)."""

    exit_code = 3


class ConvergenceError(TomographyError):
    """An iterative eigensolver did not meet its tolerance."""

    exit_code = 4

    def __init__(self, message: str, estimate: float, residual: float, iterations: int):
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{message} (estimate={estimate:.12g}, residual={residual:.3e}, "
            f"iterations={iterations})"
        )
