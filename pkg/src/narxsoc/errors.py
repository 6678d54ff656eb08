"""Exception types shared across the package.

Input-validation failures subclass :class:`ValidationError` (itself a
``ValueError``) so the CLI can map them to exit code 1.
"""


class NarxSocError(Exception):
    """Base class for all package errors."""


class ValidationError(NarxSocError, ValueError):
    """Bad input: malformed file, wrong shape, violated precondition."""


class NotPositiveDefinite(NarxSocError, ArithmeticError):
    """Cholesky factorization met a non-positive pivot."""


class DimensionMismatch(ValidationError):
    pass


class MissingColumn(ValidationError):
    def __init__(self, column):
        super().__init__(f"missing required column {column!r}")
        self.column = column


class NonMonotonicTime(ValidationError):
    def __init__(self, line):
        super().__init__(f"time is not strictly increasing at line {line}")
        self.line = line


class MalformedNumber(ValidationError):
    pass


class InsufficientHistory(ValidationError):
    def __init__(self, cycle_id, length, delay_count):
        super().__init__(
            f"cycle {cycle_id!r} has {length} samples, needs more than {delay_count}"
        )
        self.cycle_id = cycle_id


class EmptySplit(ValidationError):
    pass


class DelayMismatch(ValidationError):
    pass


class SeedLengthMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptySeries(ValidationError):
    pass
