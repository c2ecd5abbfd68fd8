"""Exception types shared across the package."""


class DataError(ValueError):
    """Invalid input data: malformed files, broken invariants, bad tables."""


class NumericError(ArithmeticError):
    """A computation cannot proceed: degenerate geometry or statistics."""
