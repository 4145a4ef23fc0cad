"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit 1,
numerical failures exit 2.
"""


class ValidationError(ValueError):
    """Invalid input: bad configuration, malformed file, broken invariant."""


class NumericalError(RuntimeError):
    """Numerical failure inside the filter, smoother, or optimizer."""
