"""Exception classes shared across the package.

The CLI maps these onto its stable exit codes: FormatError -> 2 (I/O),
ValidationError -> 3 (validation), NumericError -> 4 (NaN tripwire).
"""


class ValidationError(ValueError):
    """Inputs violate a documented precondition (shape, range, config mismatch)."""


class FormatError(ValueError):
    """A file on disk is malformed (bad magic, truncated payload, CRC mismatch)."""

    def __init__(self, message, chunk=None):
        if chunk is not None:
            message = f"{message} (chunk: {chunk})"
        super().__init__(message)
        self.chunk = chunk


class NumericError(ArithmeticError):
    """A NaN or Inf appeared where finite values are required."""
