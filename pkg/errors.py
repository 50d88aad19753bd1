class TrackerError(Exception):
    """Base error of the tracking pipeline.

    Attributes:
        detail: Human readable description of what went wrong
        exit_code: Process exit status the CLI reports for this error
    """
    exit_code: int = 1

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class InputError(TrackerError):
    """Malformed or inconsistent input data (shapes, paths, pairs)."""
    exit_code = 1


class ParameterError(InputError):
    """A numeric parameter is outside of its valid range."""


class FormatError(InputError):
    """A file could not be parsed (.flo, problem text, config JSON)."""


class NumericalError(TrackerError):
    """Factorization failure, zero degree node, singular system."""
    exit_code = 2
